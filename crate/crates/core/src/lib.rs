pub mod autodiff;
pub mod conv;
pub mod losses;
pub mod metrics;
pub mod networks;
pub mod optim;
pub mod signal;
pub mod synth;
pub mod tensor;
pub mod training;
