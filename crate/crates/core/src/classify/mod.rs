//! Classification of candidate tensors: region labels from the existence
//! criteria, grid sweeps, sampling of the Ricci image and the locus where
//! the Ricci map degenerates.

mod image;
mod locus;
mod region;
mod svg;
mod sweep;

pub use image::{project, ricci_image_sample, write_image_csv, ImageOptions, ImagePoint, Sampling};
pub use locus::{
    degeneracy_function, degenerate_locus, g2_branches, g2_quintic, wallach_quartic, write_locus_csv, LocusPoint,
    TraceSpec,
};
pub use region::{region_label, Predicate, RegionKind, RegionLabel};
pub use svg::{scatter_svg, Layer, Viewport};
pub use sweep::{sweep_plane, wallach_from_plane, wallach_plane, write_sweep_csv, Axes, GridSpec, SweepRecord};
