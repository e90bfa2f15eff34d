//! Concrete environments.

pub mod lake;
pub mod measuring_value;
pub mod mhealth;
pub mod tabular;

pub use lake::{generate_lake, Cell, LakeEnv, LakeError, LakeMap, LakeSpec, LakeVariant};
pub use measuring_value::{MeasuringValueEnv, MeasuringValueSpec};
pub use mhealth::{discretize_state, MHealthEnv, MHealthSpec};
pub use tabular::{TabularEnv, TabularMdp};
