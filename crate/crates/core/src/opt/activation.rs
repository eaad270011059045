// SPDX-License-Identifier: Apache-2.0

//! How a changed value wakes its consumers.

use super::CostParams;
use crate::graph::RtlGraph;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// OR the change flag into every successor's activation bit unconditionally.
    Branchless,
    /// Test the change flag once and set successor bits only when it is set.
    Branching,
}

/// Strategy per node id, from each producer's static successor count.
pub fn choose_activation_strategy(g: &RtlGraph, p: &CostParams) -> Vec<Strategy> {
    (0..g.len())
        .map(|i| strategy_for(g.succs(crate::expr::NodeId(i as u32)).len(), p.activation_branchless_threshold))
        .collect()
}

/// A threshold of zero disables the branchless form.
pub fn strategy_for(successors: usize, threshold: usize) -> Strategy {
    if threshold > 0 && successors <= threshold {
        Strategy::Branchless
    } else {
        Strategy::Branching
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_boundaries() {
        assert_eq!(strategy_for(3, 8), Strategy::Branchless);
        assert_eq!(strategy_for(8, 8), Strategy::Branchless);
        assert_eq!(strategy_for(9, 8), Strategy::Branching);
        assert_eq!(strategy_for(0, 0), Strategy::Branching);
        assert_eq!(strategy_for(2, 8), Strategy::Branchless);
        assert_eq!(strategy_for(40, 8), Strategy::Branching);
        assert_eq!(strategy_for(1, 0), Strategy::Branching);
    }
}
