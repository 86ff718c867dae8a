//! Pseudo-randomness, noise distribution, and the logistic function.
//!
//! All training randomness flows through [`Rng`], a fixed 64-bit linear
//! congruential generator, so any single-threaded run is exactly
//! reproducible from its seed. Negative samples are drawn from a
//! precomputed slot table over the unigram distribution raised to a
//! configurable power.

use crate::config::SigmoidMode;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default number of slots in the negative-sample table.
pub const DEFAULT_TABLE_SIZE: usize = 100_000_000;

/// Score magnitude beyond which the table sigmoid clamps (and skips
/// gradient contributions).
pub const MAX_EXP: f64 = 6.0;

/// Number of interpolation bins in the table sigmoid.
pub const SIGMOID_BINS: usize = 1000;

/// 64-bit linear congruential generator: `state <- state * 25214903917 + 11
/// (mod 2^64)`.
///
/// Identical seeds produce identical streams; trainer thread `t` seeds with
/// `config.seed + t` so threads draw independent streams deterministically.
/// Unit-interval draws use the high 16 bits of the state - the low bits of a
/// power-of-two-modulus LCG cycle with tiny periods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng { state: seed }
    }

    /// Advances the generator and returns the new state.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(25214903917).wrapping_add(11);
        self.state
    }

    /// Uniform draw from `[0, 1)` with 16-bit granularity.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 48) as f64 / 65536.0
    }
}

/// Draws the effective half-width for one window position: uniform over
/// `1..=max_window`.
#[inline]
pub fn dynamic_window(max_window: u32, rng: &mut Rng) -> u32 {
    debug_assert!(max_window >= 1);
    max_window - (rng.next_u64() % max_window as u64) as u32
}

/// Slot table implementing the noise distribution for negative sampling:
/// word `w` owns a share of slots proportional to `count(w)^power`.
pub struct NegativeSampleTable {
    slots: Box<[u32]>,
    vocab_size: u32,
}

impl NegativeSampleTable {
    /// Builds the table. Slot shares are assigned from rounded cumulative
    /// boundaries, so every word's share is within one slot of its exact
    /// proportion (very rare words may receive zero slots).
    ///
    /// Fails with [`Error::TableTooSmall`] when `table_size` cannot give
    /// every word a chance of one slot.
    pub fn build(vocab: &Vocabulary, power: f64, table_size: usize) -> Result<NegativeSampleTable> {
        if table_size < vocab.len() {
            return Err(Error::TableTooSmall {
                table_size,
                vocab_size: vocab.len(),
            });
        }
        let total: f64 = vocab.counts().iter().map(|&c| (c as f64).powf(power)).sum();
        let mut slots = vec![0u32; table_size].into_boxed_slice();
        let mut cum = 0.0_f64;
        let mut prev_bound = 0usize;
        for (id, &count) in vocab.counts().iter().enumerate() {
            cum += (count as f64).powf(power);
            let bound = if id + 1 == vocab.len() {
                table_size
            } else {
                (((cum / total) * table_size as f64).round() as usize).min(table_size)
            };
            for slot in &mut slots[prev_bound..bound.max(prev_bound)] {
                *slot = id as u32;
            }
            prev_bound = bound.max(prev_bound);
        }
        Ok(NegativeSampleTable {
            slots,
            vocab_size: vocab.len() as u32,
        })
    }

    /// Number of slots.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Raw slot contents (id per slot), mostly useful for inspecting shares.
    pub fn slots(&self) -> &[u32] {
        &self.slots
    }

    /// Draws one word id from the noise distribution.
    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> u32 {
        self.slots[((rng.next_u64() >> 16) as usize) % self.slots.len()]
    }

    /// Draws one word id different from `exclude`. Redraws on collision; if
    /// 100 consecutive draws all collide (degenerate tables), falls back
    /// deterministically to `(exclude + 1) mod vocab_size` so a skewed
    /// distribution can never livelock a trainer.
    #[inline]
    pub fn sample_excluding(&self, rng: &mut Rng, exclude: u32) -> u32 {
        for _ in 0..100 {
            let id = self.sample(rng);
            if id != exclude {
                return id;
            }
        }
        (exclude + 1) % self.vocab_size
    }
}

/// Logistic function `1 / (1 + e^-x)` in one of two evaluation modes.
///
/// In [`SigmoidMode::Table`] the value is a piecewise-linear interpolation
/// over 1000 bins on \[-6, 6\], clamped to 0/1 outside, and - matching
/// classic lookup-table trainers - gradient contributions are skipped
/// entirely (error 0) once the score magnitude exceeds 6. Exact mode always
/// computes; it is the default and what every correctness oracle uses.
pub struct Sigmoid<F: Scalar> {
    mode: SigmoidMode,
    /// `SIGMOID_BINS + 1` knot values over \[-6, 6\] (table mode only).
    knots: Option<Box<[F]>>,
}

impl<F: Scalar> Sigmoid<F> {
    pub fn new(mode: SigmoidMode) -> Sigmoid<F> {
        let knots = match mode {
            SigmoidMode::Exact => None,
            SigmoidMode::Table => {
                let knots: Vec<F> = (0..=SIGMOID_BINS)
                    .map(|i| {
                        let x = -MAX_EXP + 2.0 * MAX_EXP * i as f64 / SIGMOID_BINS as f64;
                        F::from_f64(1.0 / (1.0 + (-x).exp()))
                    })
                    .collect();
                Some(knots.into_boxed_slice())
            }
        };
        Sigmoid { mode, knots }
    }

    pub fn exact() -> Sigmoid<F> {
        Sigmoid::new(SigmoidMode::Exact)
    }

    pub fn table() -> Sigmoid<F> {
        Sigmoid::new(SigmoidMode::Table)
    }

    pub fn mode(&self) -> SigmoidMode {
        self.mode
    }

    /// `sigma(x)`, clamped to exactly 0/1 outside \[-6, 6\] in table mode.
    #[inline]
    pub fn value(&self, x: F) -> F {
        match &self.knots {
            None => {
                let one = F::one();
                one / (one + (-x).exp())
            }
            Some(knots) => {
                let max = F::from_f64(MAX_EXP);
                if x >= max {
                    return F::one();
                }
                if x <= -max {
                    return F::zero();
                }
                let scale = F::from_f64(SIGMOID_BINS as f64 / (2.0 * MAX_EXP));
                let t = (x + max) * scale;
                let i = (t.as_f64() as usize).min(SIGMOID_BINS - 1);
                let frac = t - F::from_f64(i as f64);
                knots[i] + (knots[i + 1] - knots[i]) * frac
            }
        }
    }

    /// Training error `label - sigma(x)` for a positive (`label = 1`) or
    /// negative (`label = 0`) example. Returns `None` when the contribution
    /// is skipped (table mode, `|x| > 6`).
    #[inline]
    pub fn error(&self, positive: bool, x: F) -> Option<F> {
        if self.mode == SigmoidMode::Table && x.abs() > F::from_f64(MAX_EXP) {
            return None;
        }
        let label = if positive { F::one() } else { F::zero() };
        Some(label - self.value(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(entries: &[(&str, u64)]) -> Vocabulary {
        Vocabulary::from_entries(
            entries.iter().map(|&(t, c)| (t.to_owned(), c)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn lcg_recurrence_is_fixed() {
        let mut rng = Rng::new(1);
        // One step of state * 25214903917 + 11 from state 1.
        assert_eq!(rng.next_u64(), 25214903928);
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn unit_draws_live_in_unit_interval() {
        let mut rng = Rng::new(7);
        let mut min = 1.0f64;
        let mut max = 0.0f64;
        for _ in 0..100_000 {
            let u = rng.next_unit();
            assert!((0.0..1.0).contains(&u));
            min = min.min(u);
            max = max.max(u);
        }
        assert!(min < 0.01 && max > 0.99, "draws not spread: [{min}, {max}]");
    }

    #[test]
    fn dynamic_window_uniform_over_one_to_max() {
        let mut rng = Rng::new(3);
        let mut freq = [0u32; 6];
        let draws = 1_000_000;
        for _ in 0..draws {
            let b = dynamic_window(5, &mut rng);
            assert!((1..=5).contains(&b));
            freq[b as usize] += 1;
        }
        for b in 1..=5 {
            let p = freq[b] as f64 / draws as f64;
            assert!((p - 0.2).abs() < 0.01, "b={b} has frequency {p}");
        }
        assert_eq!(dynamic_window(1, &mut rng), 1);
    }

    #[test]
    fn table_shares_match_powered_counts_within_one_slot() {
        let v = vocab(&[("a", 4), ("b", 1)]);
        let table = NegativeSampleTable::build(&v, 0.75, 10_000).unwrap();
        let a_slots = table.slots().iter().filter(|&&id| id == 0).count();
        let share = 4f64.powf(0.75) / (4f64.powf(0.75) + 1.0); // ~0.7388
        let exact = share * 10_000.0;
        assert!(
            (a_slots as f64 - exact).abs() <= 1.0,
            "a has {a_slots} slots, exact share {exact}"
        );
        assert_eq!(
            table.slots().iter().filter(|&&id| id == 1).count(),
            10_000 - a_slots
        );
        assert!(table.slots().iter().all(|&id| id < 2));
    }

    #[test]
    fn table_smaller_than_vocab_errors() {
        let v = vocab(&[("a", 2), ("b", 1), ("c", 1)]);
        assert!(matches!(
            NegativeSampleTable::build(&v, 0.75, 2),
            Err(Error::TableTooSmall {
                table_size: 2,
                vocab_size: 3
            })
        ));
    }

    #[test]
    fn sample_replays_the_documented_stream() {
        let v = vocab(&[("a", 5), ("b", 3), ("c", 2)]);
        let table = NegativeSampleTable::build(&v, 0.75, 1000).unwrap();
        let mut rng = Rng::new(42);
        let got: Vec<u32> = (0..10).map(|_| table.sample(&mut rng)).collect();
        // Independent replay of the contract: state' = state * 25214903917 +
        // 11, slot index = (state' >> 16) % len.
        let mut state = 42u64;
        let expect: Vec<u32> = (0..10)
            .map(|_| {
                state = state.wrapping_mul(25214903917).wrapping_add(11);
                table.slots()[((state >> 16) as usize) % table.len()]
            })
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn sample_excluding_never_returns_excluded() {
        let v = vocab(&[("a", 9), ("b", 1)]);
        let table = NegativeSampleTable::build(&v, 1.0, 1000).unwrap();
        let mut rng = Rng::new(5);
        for _ in 0..200 {
            assert_eq!(table.sample_excluding(&mut rng, 0), 1);
        }
    }

    #[test]
    fn sample_excluding_falls_back_instead_of_livelocking() {
        // Extreme skew: every slot belongs to word 0.
        let v = vocab(&[("a", 1_000_000), ("b", 1)]);
        let table = NegativeSampleTable::build(&v, 0.75, 1000).unwrap();
        assert!(table.slots().iter().all(|&id| id == 0));
        let mut rng = Rng::new(1);
        // Excluding the only word in the table terminates deterministically.
        assert_eq!(table.sample_excluding(&mut rng, 0), 1);
    }

    #[test]
    fn sigmoid_exact_values() {
        let s: Sigmoid<f64> = Sigmoid::exact();
        assert_eq!(s.value(0.0), 0.5);
        assert!((s.value(6.0) - 0.997527).abs() < 1e-6);
        assert!((s.value(-6.0) - 0.002473).abs() < 1e-6);
        // Exact mode never skips, even far outside [-6, 6].
        assert!((s.error(false, 20.0).unwrap() - (-1.0)).abs() < 1e-8);
        assert!((s.error(true, 0.2).unwrap() - 0.450166).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_table_tracks_exact_within_tolerance() {
        let t: Sigmoid<f64> = Sigmoid::table();
        let e: Sigmoid<f64> = Sigmoid::exact();
        let mut worst = 0.0f64;
        for i in 0..=4800 {
            let x = -6.0 + 12.0 * i as f64 / 4800.0;
            worst = worst.max((t.value(x) - e.value(x)).abs());
        }
        assert!(worst <= 0.01, "max table error {worst}");
    }

    #[test]
    fn sigmoid_table_is_monotone_and_clamps() {
        let t: Sigmoid<f64> = Sigmoid::table();
        let mut last = -1.0;
        for i in 0..=2000 {
            let x = -8.0 + 16.0 * i as f64 / 2000.0;
            let v = t.value(x);
            assert!(v >= last - 1e-15, "not monotone at {x}");
            assert!((0.0..=1.0).contains(&v));
            last = v;
        }
        assert_eq!(t.value(6.0001), 1.0);
        assert_eq!(t.value(-6.0001), 0.0);
    }

    #[test]
    fn sigmoid_table_skips_beyond_max_exp() {
        let t: Sigmoid<f64> = Sigmoid::table();
        // A confidently-wrong negative is skipped in table mode...
        assert_eq!(t.error(false, 20.0), None);
        assert_eq!(t.error(true, -20.0), None);
        // ...but inside the range errors are computed.
        assert!(t.error(true, 0.2).is_some());
        // Exact mode computes everywhere.
        let e: Sigmoid<f64> = Sigmoid::exact();
        assert!(e.error(false, 20.0).is_some());
    }

    #[test]
    fn sigmoid_f32_instantiation_matches_f64_closely() {
        let s32: Sigmoid<f32> = Sigmoid::exact();
        let s64: Sigmoid<f64> = Sigmoid::exact();
        for x in [-5.0, -1.0, -0.1, 0.0, 0.2, 1.0, 4.5] {
            assert!((s32.value(x as f32) as f64 - s64.value(x)).abs() < 1e-6);
        }
    }
}
