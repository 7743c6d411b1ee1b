use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Dual cost accounting for one run.
///
/// `classical_steps` counts process-simulation steps actually performed
/// (unit cost per step). `quantum_charged` counts the queries a quantum
/// mean-estimation oracle would have needed; it is charged by the emulator
/// and never inferred from wall-clock work. `per_level` splits the charged
/// count over the levels of the outermost call.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub classical_steps: u64,
    pub quantum_charged: u64,
    pub per_level: BTreeMap<u32, u64>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add_steps(&mut self, steps: u64) {
        self.classical_steps = self.classical_steps.saturating_add(steps);
    }

    pub fn charge(&mut self, queries: u64) {
        self.quantum_charged = self.quantum_charged.saturating_add(queries);
    }

    pub fn charge_level(&mut self, level: u32, queries: u64) {
        self.charge(queries);
        let slot = self.per_level.entry(level).or_insert(0);
        *slot = slot.saturating_add(queries);
    }

    /// Componentwise sum; commutative and associative.
    pub fn merge(&mut self, other: &CostLedger) {
        self.add_steps(other.classical_steps);
        self.quantum_charged = self.quantum_charged.saturating_add(other.quantum_charged);
        for (&level, &count) in &other.per_level {
            let slot = self.per_level.entry(level).or_insert(0);
            *slot = slot.saturating_add(count);
        }
    }

    pub fn merged(mut self, other: &CostLedger) -> CostLedger {
        self.merge(other);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ledger() -> impl Strategy<Value = CostLedger> {
        (
            0u64..1 << 40,
            0u64..1 << 40,
            proptest::collection::btree_map(0u32..8, 0u64..1 << 30, 0..4),
        )
            .prop_map(|(classical_steps, quantum_charged, per_level)| CostLedger {
                classical_steps,
                quantum_charged,
                per_level,
            })
    }

    proptest! {
        #[test]
        fn merge_commutes(a in ledger(), b in ledger()) {
            prop_assert_eq!(a.clone().merged(&b), b.merged(&a));
        }

        #[test]
        fn merge_associates(a in ledger(), b in ledger(), c in ledger()) {
            let left = a.clone().merged(&b).merged(&c);
            let right = a.merged(&b.merged(&c));
            prop_assert_eq!(left, right);
        }

        #[test]
        fn merge_never_decreases(a in ledger(), b in ledger()) {
            let m = a.clone().merged(&b);
            prop_assert!(m.classical_steps >= a.classical_steps);
            prop_assert!(m.quantum_charged >= a.quantum_charged);
        }
    }

    #[test]
    fn step_counter_increments() {
        let mut l = CostLedger::new();
        l.add_steps(5);
        l.add_steps(1);
        assert_eq!(l.classical_steps, 6);
    }
}
