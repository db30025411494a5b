//! Feature maps, prototype banks, their binary containers and ROIAlign.

mod format;
mod roi;
mod types;

pub use format::{
    decode_bank, decode_feature_map, encode_bank, encode_feature_map, load_bank,
    load_feature_map, peek_bank_header, peek_feature_header, save_bank, save_feature_map,
    FeatureHeader, BANK_MAGIC, FEATURE_HEADER_LEN, FEATURE_MAGIC,
};
pub(crate) use format::{put_f32s, put_u32, read_file, write_file, ByteReader};
pub use roi::{roi_align, DEFAULT_GRID};
pub use types::{BBox, FeatureMap, PrototypeBank, RegionFeatures};
pub(crate) use types::normalize_in_place;
