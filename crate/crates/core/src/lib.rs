pub mod constitutive;
pub mod error;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod registration;
pub mod repair;
pub mod sampling;
pub mod shapes;
pub mod smoothing;
pub mod transform;
pub mod volume;

pub use error::{Error, Result};
pub use mesh::TriMesh;
pub use transform::RigidTransform;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/meshes.md")]
    struct Meshes;
    #[doc = include_str!("../../../book/src/repair.md")]
    struct Repair;
    #[doc = include_str!("../../../book/src/sampling-smoothing.md")]
    struct SamplingSmoothing;
    #[doc = include_str!("../../../book/src/registration.md")]
    struct Registration;
    #[doc = include_str!("../../../book/src/metrics.md")]
    struct Metrics;
    #[doc = include_str!("../../../book/src/volumes.md")]
    struct Volumes;
    #[doc = include_str!("../../../book/src/constitutive.md")]
    struct Constitutive;
    #[doc = include_str!("../../../book/src/schemas.md")]
    struct Schemas;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
