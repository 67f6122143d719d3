//! Single-customer assortment optimization: `max_S sum_{n in S} P(n, S) p_n`.
//!
//! Used both as the column-generation pricing problem (prices
//! `r_n - pi(l_n)`) and by the optimized routing policy (prices
//! `r_n - marginal value`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::choice::{Assortment, AttractionModel, ChoiceModel};
use crate::model::ProductId;

/// Largest candidate set enumerated exhaustively.
pub const DEFAULT_N_MAX: usize = 20;

/// Declared (empirically validated, not proven) guarantee of local search.
pub const DEFAULT_LOCAL_SEARCH_GUARANTEE: f64 = 0.95;

const TIE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubproblemError {
    #[error("sort solver needs an attraction-form choice model")]
    NotAttraction,
    #[error("{n} candidate products exceed the enumeration cap {n_max}")]
    TooManyProducts { n: usize, n_max: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub assortment: Assortment,
    /// `sum_{n in S} P(n, S) p_n`, without any arrival-rate factor.
    pub value: f64,
    /// The value is at least `guarantee` times the optimum.
    pub guarantee: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum SubproblemSolver {
    /// Exact prefix scan; attraction models only.
    Sort,
    /// Exhaustive enumeration of every subset of the candidates.
    BruteForce { n_max: usize },
    /// Add/drop/swap hill climbing from the empty set plus `restarts`
    /// random starts. Reports `guarantee` as declared, not proven.
    LocalSearch {
        restarts: usize,
        guarantee: f64,
        seed: u64,
    },
    /// Enumerates every subset and returns the *worst* assortment whose
    /// value still reaches `guarantee` times the optimum. Exists to drive
    /// the approximate column-generation path with a solver that uses all
    /// the slack its guarantee allows.
    Adversarial { guarantee: f64, n_max: usize },
    /// Sort for attraction models, brute force up to [`DEFAULT_N_MAX`]
    /// candidates, local search beyond.
    #[default]
    Auto,
}

impl SubproblemSolver {
    pub fn brute_force() -> Self {
        SubproblemSolver::BruteForce {
            n_max: DEFAULT_N_MAX,
        }
    }

    pub fn local_search(restarts: usize, seed: u64) -> Self {
        SubproblemSolver::LocalSearch {
            restarts,
            guarantee: DEFAULT_LOCAL_SEARCH_GUARANTEE,
            seed,
        }
    }

    /// Guarantee this solver certifies on `model` with `n` candidates.
    pub fn guarantee(&self, model: &ChoiceModel, n: usize) -> f64 {
        match self {
            SubproblemSolver::Sort | SubproblemSolver::BruteForce { .. } => 1.0,
            SubproblemSolver::LocalSearch { guarantee, .. }
            | SubproblemSolver::Adversarial { guarantee, .. } => *guarantee,
            SubproblemSolver::Auto => {
                if model.as_attraction().is_some() || n <= DEFAULT_N_MAX {
                    1.0
                } else {
                    DEFAULT_LOCAL_SEARCH_GUARANTEE
                }
            }
        }
    }

    /// Optimizes over subsets of `universe`; `price` is indexed by product id.
    pub fn solve(
        &self,
        model: &ChoiceModel,
        price: &[f64],
        universe: &[ProductId],
    ) -> Result<SubproblemResult, SubproblemError> {
        match self {
            SubproblemSolver::Sort => {
                let m = model
                    .as_attraction()
                    .ok_or(SubproblemError::NotAttraction)?;
                Ok(assortment_subproblem_sort(m, price, universe))
            }
            SubproblemSolver::BruteForce { n_max } => {
                assortment_subproblem_bruteforce(model, price, universe, *n_max)
            }
            SubproblemSolver::LocalSearch {
                restarts,
                guarantee,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut r =
                    assortment_subproblem_localsearch(model, price, universe, *restarts, &mut rng);
                r.guarantee = *guarantee;
                Ok(r)
            }
            SubproblemSolver::Adversarial { guarantee, n_max } => {
                adversarial(model, price, universe, *guarantee, *n_max)
            }
            SubproblemSolver::Auto => match model.as_attraction() {
                Some(m) => Ok(assortment_subproblem_sort(m, price, universe)),
                None if universe.len() <= DEFAULT_N_MAX => {
                    assortment_subproblem_bruteforce(model, price, universe, DEFAULT_N_MAX)
                }
                None => SubproblemSolver::local_search(8, 0).solve(model, price, universe),
            },
        }
    }
}

/// Exact solver for attraction models.
///
/// Writing `w_n = mu_n + nu_n` and `D_0 = 1 + sum mu`, an assortment with
/// value `z` is optimal iff no set improves `sum_S (w_n p_n - z nu_n)`
/// beyond `z D_0`, and that sum is maximized by taking every product with
/// `p_n w_n / nu_n > z`. The optimum is therefore a prefix of the products
/// sorted by `p_n w_n / nu_n` (infinite when `nu_n = 0`); for MNL this is
/// plain descending price. Among equally good prefixes the shortest wins;
/// equal keys keep ascending id order.
pub fn assortment_subproblem_sort(
    model: &AttractionModel,
    price: &[f64],
    universe: &[ProductId],
) -> SubproblemResult {
    let mut candidates: Vec<(ProductId, f64)> = universe
        .iter()
        .copied()
        .filter(|&n| price[n] > 0.0 && model.mu(n) + model.nu(n) > 0.0)
        .map(|n| {
            let w = model.mu(n) + model.nu(n);
            let key = if model.nu(n) == 0.0 {
                f64::INFINITY
            } else {
                price[n] * w / model.nu(n)
            };
            (n, key)
        })
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let base = 1.0 + model.mu_weights().iter().sum::<f64>();
    let mut numerator = 0.0;
    let mut nu_sum = 0.0;
    let mut best_len = 0;
    let mut best_value: f64 = 0.0;
    for (i, &(n, _)) in candidates.iter().enumerate() {
        numerator += (model.mu(n) + model.nu(n)) * price[n];
        nu_sum += model.nu(n);
        let value = numerator / (base + nu_sum);
        if value > best_value + TIE * (1.0 + best_value.abs()) {
            best_value = value;
            best_len = i + 1;
        }
    }
    let assortment = Assortment::new(candidates[..best_len].iter().map(|c| c.0));
    let value = ChoiceModel::Attraction(model.clone()).expected_revenue(&assortment, price);
    SubproblemResult {
        assortment,
        value,
        guarantee: 1.0,
    }
}

fn enumerate_values(
    model: &ChoiceModel,
    price: &[f64],
    universe: &[ProductId],
    n_max: usize,
) -> Result<Vec<(Assortment, f64)>, SubproblemError> {
    if universe.len() > n_max.min(63) {
        return Err(SubproblemError::TooManyProducts {
            n: universe.len(),
            n_max,
        });
    }
    Ok((0..1u64 << universe.len())
        .map(|mask| {
            let s = Assortment::from_mask(mask, universe);
            let v = model.expected_revenue(&s, price);
            (s, v)
        })
        .collect())
}

/// Exhaustive maximum; among ties the lexicographically smallest set.
pub fn assortment_subproblem_bruteforce(
    model: &ChoiceModel,
    price: &[f64],
    universe: &[ProductId],
    n_max: usize,
) -> Result<SubproblemResult, SubproblemError> {
    let all = enumerate_values(model, price, universe, n_max)?;
    let mut best = (Assortment::empty(), 0.0);
    for (s, v) in all {
        let tie = (v - best.1).abs() <= TIE * (1.0 + best.1.abs());
        if (!tie && v > best.1) || (tie && s < best.0) {
            best = (s, v);
        }
    }
    Ok(SubproblemResult {
        assortment: best.0,
        value: best.1,
        guarantee: 1.0,
    })
}

/// Hill climbing over add, drop and swap moves. The first start is the
/// empty set; each restart begins from a uniformly random subset. The
/// returned guarantee is 1 only when the candidate set is a single product,
/// where the search trivially covers both subsets; callers overwrite it
/// with their declared factor otherwise.
pub fn assortment_subproblem_localsearch<R: Rng>(
    model: &ChoiceModel,
    price: &[f64],
    universe: &[ProductId],
    restarts: usize,
    rng: &mut R,
) -> SubproblemResult {
    let eval = |set: &[bool]| -> (Assortment, f64) {
        let s = Assortment::new(
            universe
                .iter()
                .zip(set)
                .filter(|(_, &on)| on)
                .map(|(&n, _)| n),
        );
        let v = model.expected_revenue(&s, price);
        (s, v)
    };
    let climb = |mut set: Vec<bool>| -> (Assortment, f64) {
        let (_, mut value) = eval(&set);
        loop {
            let mut best_move: Option<(Vec<bool>, f64)> = None;
            let mut consider = |cand: Vec<bool>| {
                let (_, v) = eval(&cand);
                let bar = best_move.as_ref().map_or(value, |b| b.1);
                if v > bar + TIE * (1.0 + bar.abs()) {
                    best_move = Some((cand, v));
                }
            };
            for i in 0..set.len() {
                let mut c = set.clone();
                c[i] = !c[i];
                consider(c);
                if set[i] {
                    for j in 0..set.len() {
                        if !set[j] {
                            let mut c = set.clone();
                            c[i] = false;
                            c[j] = true;
                            consider(c);
                        }
                    }
                }
            }
            match best_move {
                Some((c, v)) => {
                    set = c;
                    value = v;
                }
                None => return eval(&set),
            }
        }
    };

    let mut best = climb(vec![false; universe.len()]);
    for _ in 0..restarts {
        let start: Vec<bool> = (0..universe.len()).map(|_| rng.gen_bool(0.5)).collect();
        let cand = climb(start);
        let tie = (cand.1 - best.1).abs() <= TIE * (1.0 + best.1.abs());
        if (!tie && cand.1 > best.1) || (tie && cand.0 < best.0) {
            best = cand;
        }
    }
    SubproblemResult {
        assortment: best.0,
        value: best.1,
        guarantee: if universe.len() <= 1 { 1.0 } else { 0.0 },
    }
}

fn adversarial(
    model: &ChoiceModel,
    price: &[f64],
    universe: &[ProductId],
    guarantee: f64,
    n_max: usize,
) -> Result<SubproblemResult, SubproblemError> {
    let all = enumerate_values(model, price, universe, n_max)?;
    let opt = all.iter().map(|a| a.1).fold(0.0, f64::max);
    let floor = guarantee * opt;
    let (assortment, value) = all
        .into_iter()
        .filter(|(_, v)| *v >= floor)
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
        .expect("the optimum always qualifies");
    Ok(SubproblemResult {
        assortment,
        value,
        guarantee,
    })
}
