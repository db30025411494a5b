//! Instance, class and background prototypes.

mod cluster;
mod instance;
mod instances;
mod sinkhorn;

pub use cluster::{
    build_background_prototypes, build_class_prototype, cluster_instances, cluster_step,
    BuildConfig, CentroidSet, ClusterConfig, PrototypeMode,
};
pub use instance::{instance_prototype, select_cells, InstancePrototype, PatchMask, Region};
pub use instances::{
    build_bank, format_instance_list, parse_instance_list, read_instance_list, InstanceRecord,
    MaskRecord,
};
pub use sinkhorn::{
    sinkhorn, sinkhorn_traced, uniform_marginal, SinkhornConfig, SinkhornTrace, TransportPlan,
};
