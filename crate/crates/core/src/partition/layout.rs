// SPDX-License-Identifier: Apache-2.0

//! Packing supernode active bits into machine words, in supernode order, so
//! one zero test skips a run of consecutive supernodes.

use serde::Serialize;

pub const ACTIVE_WORD_BITS: usize = 64;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ActiveLayout {
    pub words: usize,
    /// `(word, bit)` of each supernode.
    pub slots: Vec<(u32, u32)>,
}

pub fn plan_active_layout(supernodes: usize) -> ActiveLayout {
    ActiveLayout {
        words: supernodes.div_ceil(ACTIVE_WORD_BITS),
        slots: (0..supernodes)
            .map(|i| ((i / ACTIVE_WORD_BITS) as u32, (i % ACTIVE_WORD_BITS) as u32))
            .collect(),
    }
}
