pub mod continuous;
pub mod discrete;
pub mod sequence;
pub mod validate;

pub use continuous::{
    weight_continuous, ContinuousProblem, DecayFunction, ExpTerm, PerturbationKernelContinuous,
    SampledFunction,
};
pub use discrete::{
    weight_discrete, DiscreteProblem, Envelope, KernelTable, PerturbationKernelDiscrete, WeightForm,
};
pub use sequence::{DecaySequence, SignConstraint, Tail};
pub use validate::{
    upper_sum_forcing, upper_sum_perturbation, validate_continuous, validate_discrete,
    ConditionCheck, Status, UpperSum, ValidationReport,
};
