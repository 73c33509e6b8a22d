//! Scene file I/O: the splat PLY layout, the plain-text camera format, and
//! deterministic synthetic scene generation.

mod cameras;
mod ply;
mod synth;

pub use cameras::{read_cameras, write_cameras};
pub use ply::{ply_bytes, read_ply, write_ply};
pub use synth::{camera_ring, generate_synthetic, SyntheticSceneSpec};
