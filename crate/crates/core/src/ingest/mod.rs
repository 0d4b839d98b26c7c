//! Getting data in: ADOS CSV tables, PGM/PPM images, and seeded synthetic
//! stand-ins for both.

pub mod csv;
pub mod pnm;
pub mod synth;

pub use self::csv::{parse_ados_csv, parse_ados_records, records_to_dataset, write_ados_csv, CsvSchema};
pub use self::pnm::{decode_image, encode_image, read_image_dataset, write_image_dataset};
pub use self::synth::{
    default_codebook, sha256_hex, synth_ados_records, synth_images, synth_paired, synth_tabular,
    SynthManifest, SynthesisConfig,
};
