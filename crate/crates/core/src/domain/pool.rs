//! Allocation of noise-symbol indices.
//!
//! Every certification run owns one pool; indices grow monotonically and are
//! never reused, so shared symbols keep their correlation meaning across
//! products, sums, and the final margin computation.

use std::ops::Range;

#[derive(Debug, Clone, Default)]
pub struct NoisePool {
    next: u32,
}

impl NoisePool {
    pub fn new() -> Self {
        NoisePool { next: 0 }
    }

    pub fn fresh(&mut self) -> u32 {
        let id = self.next;
        self.next += 1;
        id
    }

    /// Allocates `n` consecutive fresh symbols.
    pub fn fresh_block(&mut self, n: usize) -> Range<u32> {
        let start = self.next;
        self.next += n as u32;
        start..self.next
    }

    /// Total number of symbols allocated so far.
    pub fn allocated(&self) -> usize {
        self.next as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_are_never_reused() {
        let mut pool = NoisePool::new();
        let a = pool.fresh();
        let block = pool.fresh_block(3);
        let b = pool.fresh();
        assert_eq!(a, 0);
        assert_eq!(block, 1..4);
        assert_eq!(b, 4);
        assert_eq!(pool.allocated(), 5);
    }
}
