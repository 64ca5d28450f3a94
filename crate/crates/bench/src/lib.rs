//! Fixtures shared by the benchmarks.

use survmi_core::sim::{replicate_cohort, Mechanism, Method, SimScenario};
use survmi_core::Dataset;

/// The dataset a method sees in replicate 0 of a MAR cohort of size `n`.
pub fn mar_dataset(n: usize, method: Method) -> Dataset {
    let mut scenario = SimScenario::standard("bench", -1.5, Mechanism::MAR);
    scenario.n = n;
    replicate_cohort(&scenario, 0).to_dataset(method)
}
