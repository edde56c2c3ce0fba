//! Classical reference codes: products of small linear codes, punctured
//! polar codes under SC decoding, exhaustive ML decoding and uncoded BPSK.

pub mod gf2;
pub mod linear;
pub mod ml;
pub mod polar;
pub mod uncoded;

pub use gf2::{kronecker, Gf2Matrix};
pub use linear::{min_distance, reverse_axes, EncodeOrder, LinearCode, ProductCode, ProductParams};
pub use ml::MlDecoder;
pub use polar::{construct, polar_transform, random_puncture, ConstructionRecord, PolarSpec};
pub use uncoded::{q_function, uncoded_bpsk_ber};
