//! Vehicle dynamics models, a synthetic ground-truth plant, one-step model
//! validity analysis and model-based EKF observers.

pub mod dynamics;
pub mod estimation;
pub mod plant;
pub mod validity;
