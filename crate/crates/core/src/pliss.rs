//! Pliss times of real sequences and their localized and periodic variants.
//!
//! An index `m ≥ 1` is a `c1`-Pliss time of `(a_i)` when every trailing
//! partial sum is large:
//!
//! ```text
//! a_{k+1} + … + a_m ≥ c1 · (m − k)    for every k = 0, …, m − 1.
//! ```
//!
//! All indices in this module are 1-based.
//!
//! The functions are generic over [`Scalar`], implemented for `f64` and for
//! exact rationals (`Ratio<i64>`, `Ratio<i128>`). In exact mode the
//! comparisons are exact; in float mode every `≥` is evaluated as
//! `≥ −tie` with the tie tolerance carried by the sequence (default 0).
//!
//! # Periodic sequences
//!
//! For a `π`-periodic sequence, if some `m > π` is a `c1`-Pliss time then so
//! is `m + π`: taking `k = m − π` shows the period sum is at least `c1·π`,
//! and every trailing window of `m + π` splits into a window of `m` plus
//! whole periods. Conversely `m + π` being a Pliss time makes `m` one. Hence
//! `i ∈ {1, …, π}` is Pliss at every `i + nπ` iff it is Pliss at `i + π`,
//! and checking the indices `i, i + π, i + 2π` (three unrolled periods)
//! decides the condition "for every n ≥ 0" exactly.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// Arithmetic used by the Pliss algorithms.
pub trait Scalar: Num + Signed + Clone + PartialOrd + FromPrimitive + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("index fits the scalar type")
    }
}

impl Scalar for f64 {}
impl Scalar for Ratio<i64> {}
impl Scalar for Ratio<i128> {}

fn max_of<T: Scalar>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

fn min_of<T: Scalar>(a: T, b: T) -> T {
    if a <= b {
        a
    } else {
        b
    }
}

/// A finite sequence `a_1, …, a_n` with a bound `A ≥ max |a_i|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSequence<T = f64> {
    values: Vec<T>,
    bound: T,
    tie: T,
}

impl<T: Scalar> RealSequence<T> {
    /// Sequence with the tightest bound `A = max |a_i|`.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("sequence has no entries".into()));
        }
        let bound = values
            .iter()
            .map(|v| v.abs())
            .fold(T::zero(), max_of);
        Ok(Self {
            values,
            bound,
            tie: T::zero(),
        })
    }

    pub fn with_bound(values: Vec<T>, bound: T) -> Result<Self> {
        let mut s = Self::new(values)?;
        if bound < s.bound {
            bail!(
                Parameter,
                "bound A = {:?} is below max |a_i| = {:?}",
                bound,
                s.bound
            );
        }
        s.bound = bound;
        Ok(s)
    }

    /// Sets the tie tolerance used by every `≥` comparison.
    pub fn with_tie(mut self, tie: T) -> Self {
        self.tie = tie.abs();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn bound(&self) -> &T {
        &self.bound
    }

    pub fn tie(&self) -> &T {
        &self.tie
    }

    /// `a_i`, 1-based.
    pub fn get(&self, i: usize) -> &T {
        &self.values[i - 1]
    }

    fn derive(&self, values: Vec<T>) -> Self {
        Self {
            values,
            bound: self.bound.clone(),
            tie: self.tie.clone(),
        }
    }
}

/// A `π`-periodic sequence, `a_i = one_period[((i − 1) mod π) + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSequence<T = f64> {
    one_period: RealSequence<T>,
}

impl<T: Scalar> PeriodicSequence<T> {
    pub fn new(one_period: RealSequence<T>) -> Self {
        Self { one_period }
    }

    pub fn from_values(values: Vec<T>) -> Result<Self> {
        Ok(Self::new(RealSequence::new(values)?))
    }

    pub fn period(&self) -> usize {
        self.one_period.len()
    }

    pub fn one_period(&self) -> &RealSequence<T> {
        &self.one_period
    }

    /// `a_i` for any `i ≥ 1`.
    pub fn get(&self, i: usize) -> &T {
        self.one_period.get((i - 1) % self.period() + 1)
    }

    /// The first `periods · π` terms as a finite sequence.
    pub fn unroll(&self, periods: usize) -> RealSequence<T> {
        let values = (0..periods)
            .flat_map(|_| self.one_period.values.iter().cloned())
            .collect();
        self.one_period.derive(values)
    }

    /// `(1/π) Σ_{i=1}^{π} a_i`.
    pub fn period_mean(&self) -> T {
        period_sum(&self.one_period) / T::from_count(self.period())
    }
}

fn period_sum<T: Scalar>(a: &RealSequence<T>) -> T {
    a.values.iter().cloned().fold(T::zero(), |s, v| s + v)
}

/// A partition `I0 ∪ J0 ∪ K0 = {1, …, n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPartition {
    pub i0: Vec<usize>,
    pub j0: Vec<usize>,
    pub k0: Vec<usize>,
}

/// Which part of an [`IndexPartition`] an index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    I,
    J,
    K,
}

impl IndexPartition {
    pub fn new(i0: Vec<usize>, j0: Vec<usize>, k0: Vec<usize>) -> Self {
        Self { i0, j0, k0 }
    }

    /// Labels every index of `{1, …, n}`; fails unless the three sets are
    /// pairwise disjoint with union `{1, …, n}`.
    pub fn labels(&self, n: usize) -> Result<Vec<Part>> {
        let mut labels: Vec<Option<Part>> = vec![None; n];
        for (set, part) in [(&self.i0, Part::I), (&self.j0, Part::J), (&self.k0, Part::K)] {
            for &i in set {
                if i == 0 || i > n {
                    bail!(Range, "index {} outside 1..={}", i, n);
                }
                if labels[i - 1].replace(part).is_some() {
                    bail!(Parameter, "index {} appears in two parts", i);
                }
            }
        }
        labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                l.ok_or_else(|| Error::Parameter(alloc::format!("index {} is in no part", i + 1)))
            })
            .collect()
    }
}

/// Pliss times together with the certified count bound of the Pliss lemma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlissReport<T = f64> {
    pub pliss_times: Vec<usize>,
    pub theta_bound: T,
    /// `|pliss_times|`.
    pub count: usize,
    /// Pliss times in `{2, …, n}`, the set counted by the lemma.
    pub count_from_two: usize,
    /// `θ · n`.
    pub guaranteed: T,
    /// Whether `Σ a_i ≥ c2 · n` holds, the lemma's hypothesis.
    pub hypothesis_holds: bool,
}

fn index_mask(n: usize, set: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in set {
        if i == 0 || i > n {
            bail!(Range, "index {} outside 1..={}", i, n);
        }
        mask[i - 1] = true;
    }
    Ok(mask)
}

/// Membership mask of the Pliss times, linear time.
///
/// With `g(k) = S_k − c1·k`, `m` is a Pliss time iff
/// `g(m) ≥ max_{k<m} g(k)`.
fn pliss_mask<T: Scalar>(values: &[T], c1: &T, tie: &T) -> Vec<bool> {
    let mut mask = Vec::with_capacity(values.len());
    let mut g = T::zero();
    let mut running_max = T::zero();
    for v in values {
        g = g + v.clone() - c1.clone();
        mask.push(g.clone() - running_max.clone() >= -tie.clone());
        running_max = max_of(running_max, g.clone());
    }
    mask
}

fn mask_to_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i + 1))
        .collect()
}

/// The `c1`-Pliss times of `a`, ascending.
pub fn pliss_times<T: Scalar>(a: &RealSequence<T>, c1: &T) -> Vec<usize> {
    mask_to_indices(&pliss_mask(&a.values, c1, &a.tie))
}

/// Quadratic-time definition check, kept as the oracle for [`pliss_times`].
pub fn pliss_times_bruteforce<T: Scalar>(a: &RealSequence<T>, c1: &T) -> Vec<usize> {
    let tie = a.tie.clone();
    (1..=a.len())
        .filter(|&m| {
            let mut window = T::zero();
            (0..m).rev().all(|k| {
                window = window.clone() + a.get(k + 1).clone();
                window.clone() - c1.clone() * T::from_count(m - k) >= -tie.clone()
            })
        })
        .collect()
}

/// `θ = (c2 − c1)/(A − c1)`, requiring `A ≥ c2 > c1`.
pub fn pliss_theta<T: Scalar>(bound: &T, c1: &T, c2: &T) -> Result<T> {
    if !(bound >= c2 && c2 > c1) {
        bail!(
            Parameter,
            "require A ≥ c2 > c1, got A = {:?}, c1 = {:?}, c2 = {:?}",
            bound,
            c1,
            c2
        );
    }
    Ok((c2.clone() - c1.clone()) / (bound.clone() - c1.clone()))
}

/// Pliss times of `a` with the lemma's guaranteed count, using `A = a.bound()`.
pub fn pliss_report<T: Scalar>(a: &RealSequence<T>, c1: &T, c2: &T) -> Result<PlissReport<T>> {
    let theta = pliss_theta(a.bound(), c1, c2)?;
    let times = pliss_times(a, c1);
    let n = T::from_count(a.len());
    let hypothesis_holds = period_sum(a) - c2.clone() * n.clone() >= -a.tie.clone();
    Ok(PlissReport {
        count: times.len(),
        count_from_two: times.iter().filter(|&&m| m >= 2).count(),
        guaranteed: theta.clone() * n,
        theta_bound: theta,
        pliss_times: times,
        hypothesis_holds,
    })
}

/// First localization: lower the sequence off `I` to `min(a_i, c0)` and
/// take the Pliss times of the result. Every returned index lies in `I` and
/// is a `c1`-Pliss time of `a`.
pub fn localized_pliss_lowering<T: Scalar>(
    a: &RealSequence<T>,
    prescribed: &[usize],
    c0: &T,
    c1: &T,
) -> Result<Vec<usize>> {
    if c0 >= c1 {
        bail!(Parameter, "require c0 < c1, got c0 = {:?}, c1 = {:?}", c0, c1);
    }
    let lowered = lowered_sequence(a, prescribed, c0)?;
    Ok(pliss_times(&lowered, c1))
}

/// `b_i = a_i` on `I` and `b_i = min(a_i, c0)` elsewhere.
pub fn lowered_sequence<T: Scalar>(
    a: &RealSequence<T>,
    prescribed: &[usize],
    c0: &T,
) -> Result<RealSequence<T>> {
    let mask = index_mask(a.len(), prescribed)?;
    let values = a
        .values
        .iter()
        .zip(&mask)
        .map(|(v, &keep)| if keep { v.clone() } else { min_of(v.clone(), c0.clone()) })
        .collect();
    Ok(a.derive(values))
}

/// A sequence with some indices removed, `b_j = a_{i(j)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduced<S> {
    pub sequence: S,
    /// `renumber[j − 1] = i(j)`, strictly increasing.
    pub renumber: Vec<usize>,
}

impl<S> Reduced<S> {
    /// `i(j)`, 1-based.
    pub fn original_index(&self, j: usize) -> usize {
        self.renumber[j - 1]
    }
}

/// Removes the indices in `removed` and renumbers the rest in order.
pub fn reduced_sequence<T: Scalar>(
    a: &RealSequence<T>,
    removed: &[usize],
) -> Result<Reduced<RealSequence<T>>> {
    let mask = index_mask(a.len(), removed)?;
    let renumber: Vec<usize> = (1..=a.len()).filter(|&i| !mask[i - 1]).collect();
    if renumber.is_empty() {
        return Err(Error::EmptyReduction);
    }
    let values = renumber.iter().map(|&i| a.get(i).clone()).collect();
    Ok(Reduced {
        sequence: a.derive(values),
        renumber,
    })
}

/// Periodic reduction by `J = J0 + πℕ`, with `J0 ⊆ {1, …, π}` given as
/// residues. The result is periodic with period `π − |J0|` and its renumbering
/// is reported over one period.
pub fn reduced_periodic<T: Scalar>(
    a: &PeriodicSequence<T>,
    removed_residues: &[usize],
) -> Result<Reduced<PeriodicSequence<T>>> {
    let Reduced { sequence, renumber } = reduced_sequence(&a.one_period, removed_residues)?;
    Ok(Reduced {
        sequence: PeriodicSequence::new(sequence),
        renumber,
    })
}

/// Second localization: Pliss times of the `J`-reduced sequence, mapped back
/// through `i(j)`. Requires `I ∪ J` to partition the index range and
/// `a_i ≥ c1` on `J`; every returned index lies in `I` and is a `c1`-Pliss
/// time of `a`.
pub fn localized_pliss_reduction<T: Scalar>(
    a: &RealSequence<T>,
    prescribed: &[usize],
    removed: &[usize],
    c1: &T,
) -> Result<Vec<usize>> {
    let labels = IndexPartition::new(prescribed.to_vec(), removed.to_vec(), Vec::new())
        .labels(a.len())?;
    for (i, part) in labels.iter().enumerate() {
        if *part == Part::J && a.values[i].clone() - c1.clone() < -a.tie.clone() {
            bail!(
                Precondition,
                "a_{} = {:?} < c1 = {:?} for an index in J",
                i + 1,
                a.values[i],
                c1
            );
        }
    }
    if removed.len() == a.len() {
        return Err(Error::EmptyReduction);
    }
    let reduced = reduced_sequence(a, removed)?;
    Ok(pliss_times(&reduced.sequence, c1)
        .into_iter()
        .map(|m| reduced.original_index(m))
        .collect())
}

/// Indices `i ∈ {1, …, π}` such that `i + nπ` is a `c1`-Pliss time for every
/// `n ≥ 0`. Nonempty iff the period mean is at least `c1`.
pub fn ultimate_pliss_times<T: Scalar>(a: &PeriodicSequence<T>, c1: &T) -> Vec<usize> {
    let period = a.period();
    let unrolled = a.unroll(3);
    let mask = pliss_mask(&unrolled.values, c1, &unrolled.tie);
    (1..=period)
        .filter(|&i| (0..3).all(|n| mask[i - 1 + n * period]))
        .collect()
}

/// Outcome of the pret-à-porter corollary on a periodic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretaporterReport<T = f64> {
    /// `(1/|I0 ∪ K0|) Σ_{i(j) ∈ I0 ∪ K0} d_j ≥ c2`.
    pub hypothesis_holds: bool,
    pub d_average: T,
    /// Ultimate `c1`-Pliss times of `a` lying in `I0`.
    pub ultimate_times_in_i0: Vec<usize>,
    /// `|ultimate_times_in_i0| / |I0 ∪ K0|`; at least `θ` when the hypothesis holds.
    pub fraction: T,
    pub theta: T,
}

/// Evaluates the pret-à-porter corollary: reduce by `J0`, replace the `K0`
/// entries by `−A`, test the average hypothesis, and count the ultimate
/// Pliss times of the original sequence inside `I0`.
pub fn pretaporter<T: Scalar>(
    a: &PeriodicSequence<T>,
    parts: &IndexPartition,
    bound: &T,
    c1: &T,
    c2: &T,
) -> Result<PretaporterReport<T>> {
    let period = a.period();
    let labels = parts.labels(period)?;
    let tie = a.one_period.tie.clone();
    if !(-bound.clone() < c1.clone() && c1 < c2 && c2 < bound) {
        bail!(
            Precondition,
            "require −A < c1 < c2 < A, got A = {:?}, c1 = {:?}, c2 = {:?}",
            bound,
            c1,
            c2
        );
    }
    for (i, v) in a.one_period.values.iter().enumerate() {
        if v.abs() > bound.clone() {
            bail!(Precondition, "|a_{}| = {:?} exceeds A = {:?}", i + 1, v.abs(), bound);
        }
        if labels[i] == Part::J && v.clone() - c2.clone() < -tie.clone() {
            bail!(Precondition, "a_{} = {:?} < c2 = {:?} for an index in J0", i + 1, v, c2);
        }
    }
    let theta = pliss_theta(bound, c1, c2)?;
    let reduced = reduced_periodic(a, &parts.j0)?;
    let d_sum = reduced
        .renumber
        .iter()
        .map(|&i| match labels[i - 1] {
            Part::K => -bound.clone(),
            _ => a.get(i).clone(),
        })
        .fold(T::zero(), |s, v| s + v);
    let kept = T::from_count(reduced.renumber.len());
    let d_average = d_sum / kept.clone();
    let ultimate: Vec<usize> = ultimate_pliss_times(a, c1)
        .into_iter()
        .filter(|&i| labels[i - 1] == Part::I)
        .collect();
    Ok(PretaporterReport {
        hypothesis_holds: d_average.clone() - c2.clone() >= -tie,
        d_average,
        fraction: T::from_count(ultimate.len()) / kept,
        ultimate_times_in_i0: ultimate,
        theta,
    })
}
