//! Random sources for driving the simulator with known draws.

use std::collections::VecDeque;

use rand::RngCore;

/// Replays a fixed list of uniform draws in `[0, 1)`, each consumed by one
/// `rng.gen::<f64>()` call. Falls back to `fallback` once the script runs out.
#[derive(Debug, Clone)]
pub struct ScriptedRng {
    draws: VecDeque<f64>,
    fallback: f64,
    consumed: usize,
}

impl ScriptedRng {
    pub fn new(draws: impl IntoIterator<Item = f64>, fallback: f64) -> Self {
        ScriptedRng {
            draws: draws.into_iter().collect(),
            fallback,
            consumed: 0,
        }
    }

    /// Number of 64-bit words handed out so far.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn remaining(&self) -> usize {
        self.draws.len()
    }
}

/// Inverse of rand's `f64` sampling, `(x >> 11) * 2^-53`, rounding up so the
/// decoded draw is never below the scripted value.
fn encode(u: f64) -> u64 {
    assert!((0.0..1.0).contains(&u), "scripted draw {u} outside [0, 1)");
    let scale = (1u64 << 53) as f64;
    let m = ((u * scale).ceil() as u64).min((1u64 << 53) - 1);
    m << 11
}

impl RngCore for ScriptedRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.consumed += 1;
        encode(self.draws.pop_front().unwrap_or(self.fallback))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Wraps another generator and counts the words drawn from it.
#[derive(Debug, Clone)]
pub struct CountingRng<R> {
    pub inner: R,
    pub calls: usize,
}

impl<R> CountingRng<R> {
    pub fn new(inner: R) -> Self {
        CountingRng { inner, calls: 0 }
    }
}

impl<R: RngCore> RngCore for CountingRng<R> {
    fn next_u32(&mut self) -> u32 {
        self.calls += 1;
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.calls += 1;
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.calls += 1;
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.calls += 1;
        self.inner.try_fill_bytes(dest)
    }
}
