//! Exact checks of the information-theoretic claims on finite distributions.

pub mod checks;
pub mod joint;
pub mod pair_law;
pub mod spec;

pub use checks::{
    exact_infonce, ib_equivalence_check, infonce_bound_check, verify_decomposition, BoundCheck, Critic, Decomposition,
    IbEntry, IbReport,
};
pub use joint::{entropy, exact_cmi, exact_mi, FiniteJoint};
pub use pair_law::{base_joint, build_pair_law, build_pair_law_with, default_pi, DiscreteEncoder, PairLaw, Violation};
pub use spec::{run_spec, CheckOutcome, TheoryReport, TheorySpec};

/// The four-point base shipped with the default spec: labels are a function
/// of `x`, and `x` depends on the group only in the unfavourable class.
pub fn shipped_base() -> FiniteJoint {
    TheorySpec::builtin("default")
        .and_then(|s| s.base("shipped"))
        .expect("built-in theory spec is valid")
}
