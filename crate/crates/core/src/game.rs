//! Finite N-player cost game over participation start hours, with expected
//! costs under objective (EUT) and Prelec-weighted (PT) beliefs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DsmError, Result};
use crate::load_shift::{bills, cascade, LoadProfile, ShiftParams, TargetProfile};

pub const DEFAULT_TABLE_CAP: usize = 1_000_000;

/// Tolerance on the sum of a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Ordered, strictly increasing list of start hours one player may choose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSet {
    hours: Vec<usize>,
}

impl ActionSet {
    pub fn new(hours: Vec<usize>, horizon: usize) -> Result<Self> {
        if hours.is_empty() {
            return Err(DsmError::invalid("action set must not be empty"));
        }
        if hours.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DsmError::invalid(format!(
                "action set {hours:?} must be strictly increasing"
            )));
        }
        if let Some(&hour) = hours.iter().find(|&&h| h == 0 || h > horizon) {
            return Err(DsmError::HourOutOfRange { hour, horizon });
        }
        Ok(ActionSet { hours })
    }

    /// Actions `1..=n`, for games not tied to a load model.
    pub fn labels(n: usize) -> Result<Self> {
        ActionSet::new((1..=n).collect(), n.max(1))
    }

    pub fn hours(&self) -> &[usize] {
        &self.hours
    }

    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    pub fn position(&self, action: usize) -> Option<usize> {
        self.hours.binary_search(&action).ok()
    }
}

/// Number of joint actions, computed without overflow.
pub fn joint_count(action_sets: &[ActionSet]) -> u128 {
    action_sets.iter().map(|s| s.len() as u128).product()
}

/// Fully tabulated normal-form cost game.
///
/// Costs are stored player-major; within a player, joint actions are laid out
/// row-major with player 0 varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTable {
    action_sets: Vec<ActionSet>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    costs: Vec<Vec<f64>>,
}

impl GameTable {
    /// Tabulate `cost_fn` over every joint action. `cost_fn` receives the
    /// action values (not indices) and returns one cost per player.
    pub fn from_fn<F>(action_sets: Vec<ActionSet>, cap: usize, cost_fn: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> Result<Vec<f64>> + Sync,
    {
        let (dims, strides, total) = layout(&action_sets, cap)?;
        let n = action_sets.len();
        let rows: Vec<Vec<f64>> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let idx = unravel(flat, &dims, &strides);
                let actions: Vec<usize> = idx
                    .iter()
                    .zip(&action_sets)
                    .map(|(&k, s)| s.hours[k])
                    .collect();
                let row = cost_fn(&actions)?;
                if row.len() != n {
                    return Err(DsmError::dim(format!(
                        "cost function returned {} costs for {n} players",
                        row.len()
                    )));
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let costs = (0..n)
            .map(|i| rows.iter().map(|row| row[i]).collect())
            .collect();
        GameTable::assemble(action_sets, dims, strides, costs)
    }

    /// Build from explicit player-major cost vectors, each of length equal to
    /// the number of joint actions.
    pub fn from_costs(action_sets: Vec<ActionSet>, costs: Vec<Vec<f64>>) -> Result<Self> {
        let (dims, strides, total) = layout(&action_sets, usize::MAX)?;
        if costs.len() != action_sets.len() {
            return Err(DsmError::dim(format!(
                "{} cost vectors for {} players",
                costs.len(),
                action_sets.len()
            )));
        }
        if let Some((i, c)) = costs.iter().enumerate().find(|(_, c)| c.len() != total) {
            return Err(DsmError::dim(format!(
                "player {i} has {} costs, expected {total}",
                c.len()
            )));
        }
        GameTable::assemble(action_sets, dims, strides, costs)
    }

    /// Two-player game from cost matrices indexed `[row action][column action]`.
    pub fn bimatrix(row_costs: &[Vec<f64>], col_costs: &[Vec<f64>]) -> Result<Self> {
        let rows = row_costs.len();
        let cols = row_costs.first().map_or(0, Vec::len);
        if col_costs.len() != rows || row_costs.iter().chain(col_costs).any(|r| r.len() != cols) {
            return Err(DsmError::dim(
                "cost matrices must share one rectangular shape",
            ));
        }
        let flat = |m: &[Vec<f64>]| m.iter().flatten().copied().collect::<Vec<_>>();
        GameTable::from_costs(
            vec![ActionSet::labels(rows)?, ActionSet::labels(cols)?],
            vec![flat(row_costs), flat(col_costs)],
        )
    }

    fn assemble(
        action_sets: Vec<ActionSet>,
        dims: Vec<usize>,
        strides: Vec<usize>,
        costs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        for (i, c) in costs.iter().enumerate() {
            if let Some(v) = c.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(DsmError::invalid(format!(
                    "player {i} has cost {v}; costs must be finite and >= 0"
                )));
            }
        }
        Ok(GameTable {
            action_sets,
            dims,
            strides,
            costs,
        })
    }

    pub fn num_players(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn action_sets(&self) -> &[ActionSet] {
        &self.action_sets
    }

    pub fn num_joint(&self) -> usize {
        self.costs.first().map_or(0, Vec::len)
    }

    /// Player `i`'s costs over all joint actions in table order.
    pub fn player_costs(&self, i: usize) -> &[f64] {
        &self.costs[i]
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        unravel(flat, &self.dims, &self.strides)
    }

    /// Cost of player `i` at a joint action given by per-player action indices.
    pub fn cost(&self, i: usize, idx: &[usize]) -> f64 {
        self.costs[i][self.flat_index(idx)]
    }

    /// Cost of player `i` at a joint action given by action values.
    pub fn cost_at_actions(&self, i: usize, actions: &[usize]) -> Result<f64> {
        let idx = actions
            .iter()
            .enumerate()
            .map(|(p, &a)| {
                self.action_sets[p]
                    .position(a)
                    .ok_or(DsmError::UnknownAction {
                        player: p,
                        action: a,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.cost(i, &idx))
    }

    /// Max minus min over every cost entry of every player.
    pub fn max_abs_cost(&self) -> f64 {
        self.costs
            .iter()
            .flatten()
            .fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .costs
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    /// Same game with every cost multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let costs = self
            .costs
            .iter()
            .map(|v| v.iter().map(|x| x * c).collect())
            .collect();
        GameTable::assemble(
            self.action_sets.clone(),
            self.dims.clone(),
            self.strides.clone(),
            costs,
        )
    }
}

fn layout(action_sets: &[ActionSet], cap: usize) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    if action_sets.is_empty() {
        return Err(DsmError::invalid("a game needs at least one player"));
    }
    let product = joint_count(action_sets);
    if product > cap as u128 {
        return Err(DsmError::TableTooLarge { product, cap });
    }
    let dims: Vec<usize> = action_sets.iter().map(ActionSet::len).collect();
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    Ok((dims, strides, product as usize))
}

fn unravel(flat: usize, dims: &[usize], strides: &[usize]) -> Vec<usize> {
    dims.iter()
        .zip(strides)
        .map(|(&d, &s)| (flat / s) % d)
        .collect()
}

/// Tabulate every customer's bill over the Cartesian product of action sets.
pub fn dsm_game_build(
    profiles: &[LoadProfile],
    target: &TargetProfile,
    params: &ShiftParams,
    action_sets: &[ActionSet],
    cap: usize,
) -> Result<GameTable> {
    let n = profiles.len();
    if n == 0 {
        return Err(DsmError::invalid("at least one customer is required"));
    }
    if action_sets.len() != n {
        return Err(DsmError::dim(format!(
            "{} action sets for {n} customers",
            action_sets.len()
        )));
    }
    let horizon = profiles[0].horizon();
    if profiles.iter().any(|p| p.horizon() != horizon) || target.horizon() != horizon {
        return Err(DsmError::dim("profiles and target must share one horizon"));
    }
    if params.gamma().len() != n {
        return Err(DsmError::dim(format!(
            "{} gamma values for {n} customers",
            params.gamma().len()
        )));
    }
    for s in action_sets {
        if let Some(&hour) = s.hours().iter().find(|&&h| h > horizon) {
            return Err(DsmError::HourOutOfRange { hour, horizon });
        }
    }
    let b = params.price_scale();
    GameTable::from_fn(action_sets.to_vec(), cap, |actions| {
        let schedule = cascade(profiles, target.values(), params, actions);
        Ok(bills(&schedule, b))
    })
}

/// One probability vector per player over that player's action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MixedStrategyProfile {
    probs: Vec<Vec<f64>>,
}

impl MixedStrategyProfile {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        for (player, p) in probs.iter().enumerate() {
            if p.is_empty() {
                return Err(DsmError::NotOnSimplex {
                    player,
                    reason: "empty vector".into(),
                });
            }
            if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(DsmError::NotOnSimplex {
                    player,
                    reason: format!("entry {v} outside [0, 1]"),
                });
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(DsmError::NotOnSimplex {
                    player,
                    reason: format!("entries sum to {sum}"),
                });
            }
        }
        Ok(MixedStrategyProfile { probs })
    }

    pub fn uniform(dims: &[usize]) -> Self {
        MixedStrategyProfile {
            probs: dims.iter().map(|&d| vec![1.0 / d as f64; d]).collect(),
        }
    }

    /// Point mass on `idx[i]` for each player.
    pub fn pure(dims: &[usize], idx: &[usize]) -> Result<Self> {
        if dims.len() != idx.len() || idx.iter().zip(dims).any(|(k, d)| k >= d) {
            return Err(DsmError::dim(
                "pure profile indices do not match dimensions",
            ));
        }
        Ok(MixedStrategyProfile {
            probs: dims.iter().zip(idx).map(|(&d, &k)| one_hot(d, k)).collect(),
        })
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn player(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    pub fn num_players(&self) -> usize {
        self.probs.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.probs.iter().map(Vec::len).collect()
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.probs
    }

    pub(crate) fn from_raw(probs: Vec<Vec<f64>>) -> Self {
        MixedStrategyProfile { probs }
    }

    pub(crate) fn check_against(&self, game: &GameTable) -> Result<()> {
        if self.dims() != game.dims() {
            return Err(DsmError::dim(format!(
                "profile shape {:?} does not match game shape {:?}",
                self.dims(),
                game.dims()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for MixedStrategyProfile {
    type Error = DsmError;

    fn try_from(probs: Vec<Vec<f64>>) -> Result<Self> {
        MixedStrategyProfile::new(probs)
    }
}

impl From<MixedStrategyProfile> for Vec<Vec<f64>> {
    fn from(p: MixedStrategyProfile) -> Self {
        p.probs
    }
}

pub(crate) fn one_hot(len: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[k] = 1.0;
    v
}

/// Per-player Prelec distortion parameter. Player `i`'s `alpha` governs how
/// it perceives its opponents' probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightingSpec {
    alpha: Vec<f64>,
}

impl WeightingSpec {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some((i, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(**a > 0.0 && **a <= 1.0))
        {
            return Err(DsmError::invalid(format!(
                "alpha for player {i} is {a}; must lie in (0, 1]"
            )));
        }
        Ok(WeightingSpec { alpha })
    }

    pub fn uniform(players: usize, alpha: f64) -> Result<Self> {
        WeightingSpec::new(vec![alpha; players])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

impl TryFrom<Vec<f64>> for WeightingSpec {
    type Error = DsmError;

    fn try_from(alpha: Vec<f64>) -> Result<Self> {
        WeightingSpec::new(alpha)
    }
}

impl From<WeightingSpec> for Vec<f64> {
    fn from(w: WeightingSpec) -> Self {
        w.alpha
    }
}

/// How a player evaluates the opponents' mixed strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "alpha", rename_all = "lowercase")]
pub enum Mode {
    Eut,
    Pt(WeightingSpec),
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Eut => "eut",
            Mode::Pt(_) => "pt",
        }
    }

    fn check(&self, players: usize) -> Result<()> {
        match self {
            Mode::Pt(w) if w.alpha().len() != players => Err(DsmError::dim(format!(
                "{} alpha values for {players} players",
                w.alpha().len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Prelec probability weighting `exp(-(-ln s)^alpha)`, extended by
/// continuity to `w(0) = 0`.
pub fn prelec_weight(sigma: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(DsmError::invalid(format!(
            "probability {sigma} outside [0, 1]"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DsmError::invalid(format!("alpha {alpha} outside (0, 1]")));
    }
    Ok(prelec(sigma, alpha))
}

#[inline]
pub(crate) fn prelec(sigma: f64, alpha: f64) -> f64 {
    if alpha == 1.0 || sigma >= 1.0 {
        // identity at alpha = 1; returned exactly so PT(1) reproduces EUT bit-for-bit
        sigma.min(1.0)
    } else if sigma <= 0.0 {
        0.0
    } else {
        (-(-sigma.ln()).powf(alpha)).exp()
    }
}

/// The belief vectors player `i` uses for every player: its own objective
/// probabilities, and objective or weighted opponent probabilities.
pub(crate) fn beliefs(i: usize, p: &MixedStrategyProfile, mode: &Mode) -> Vec<Vec<f64>> {
    p.probs
        .iter()
        .enumerate()
        .map(|(l, pl)| match mode {
            Mode::Pt(w) if l != i => {
                let a = w.alpha[i];
                pl.iter().map(|&s| prelec(s, a)).collect()
            }
            _ => pl.clone(),
        })
        .collect()
}

/// Sum over all joint actions of `prod_l q_l(a_l) * u_i(a)`, by enumeration.
fn enumerate_expectation(game: &GameTable, i: usize, q: &[Vec<f64>]) -> f64 {
    let dims = &game.dims;
    let n = dims.len();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    for &u in &game.costs[i] {
        let weight: f64 = idx.iter().zip(q).map(|(&k, ql)| ql[k]).product();
        total += weight * u;
        for axis in (0..n).rev() {
            idx[axis] += 1;
            if idx[axis] < dims[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    total
}

/// Expected cost under objective probabilities.
pub fn eut_cost(i: usize, p: &MixedStrategyProfile, game: &GameTable) -> Result<f64> {
    p.check_against(game)?;
    check_player(i, game)?;
    Ok(enumerate_expectation(game, i, &p.probs))
}

/// Expected cost with opponents' probabilities passed through the Prelec
/// weight of player `i`. The weighted products are not renormalized.
pub fn pt_cost(
    i: usize,
    p: &MixedStrategyProfile,
    game: &GameTable,
    weights: &WeightingSpec,
) -> Result<f64> {
    p.check_against(game)?;
    check_player(i, game)?;
    let mode = Mode::Pt(weights.clone());
    mode.check(game.num_players())?;
    Ok(enumerate_expectation(game, i, &beliefs(i, p, &mode)))
}

/// Expected cost of player `i` under the given mode.
pub fn mixed_cost(
    i: usize,
    p: &MixedStrategyProfile,
    game: &GameTable,
    mode: &Mode,
) -> Result<f64> {
    match mode {
        Mode::Eut => eut_cost(i, p, game),
        Mode::Pt(w) => pt_cost(i, p, game, w),
    }
}

fn check_player(i: usize, game: &GameTable) -> Result<()> {
    if i >= game.num_players() {
        return Err(DsmError::dim(format!(
            "player {i} does not exist in a {}-player game",
            game.num_players()
        )));
    }
    Ok(())
}

/// Contract player `keep`'s cost tensor against `q` along every other axis,
/// leaving a vector over `keep`'s actions.
pub(crate) fn contract_except(
    tensor: &[f64],
    dims: &[usize],
    q: &[Vec<f64>],
    keep: usize,
) -> Vec<f64> {
    let n = dims.len();
    let mut cur: Option<Vec<f64>> = None;
    for m in (0..n).rev() {
        if m == keep {
            continue;
        }
        let src: &[f64] = cur.as_deref().unwrap_or(tensor);
        let d = dims[m];
        let inner = if m < keep { dims[keep] } else { 1 };
        let outer: usize = dims[..m].iter().product();
        let w = &q[m];
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            let dst = &mut out[o * inner..(o + 1) * inner];
            for (k, &wk) in w.iter().enumerate() {
                if wk == 0.0 {
                    continue;
                }
                let base = (o * d + k) * inner;
                for (t, slot) in dst.iter_mut().enumerate() {
                    *slot += src[base + t] * wk;
                }
            }
        }
        cur = Some(out);
    }
    cur.unwrap_or_else(|| tensor.to_vec())
}

/// Expected cost of every pure action of player `i` against the others'
/// (objective or weighted) mixed strategies.
pub fn cond_costs(
    i: usize,
    p: &MixedStrategyProfile,
    game: &GameTable,
    mode: &Mode,
) -> Result<Vec<f64>> {
    p.check_against(game)?;
    check_player(i, game)?;
    mode.check(game.num_players())?;
    Ok(cond_costs_unchecked(i, p, game, mode))
}

pub(crate) fn cond_costs_unchecked(
    i: usize,
    p: &MixedStrategyProfile,
    game: &GameTable,
    mode: &Mode,
) -> Vec<f64> {
    let q = beliefs(i, p, mode);
    contract_except(&game.costs[i], &game.dims, &q, i)
}

/// Expected cost of player `i` committing to the pure action `action`.
pub fn cond_cost(
    i: usize,
    action: usize,
    p: &MixedStrategyProfile,
    game: &GameTable,
    mode: &Mode,
) -> Result<f64> {
    check_player(i, game)?;
    let k = game.action_sets[i]
        .position(action)
        .ok_or(DsmError::UnknownAction { player: i, action })?;
    Ok(cond_costs(i, p, game, mode)?[k])
}

/// Per-player regret against the best pure deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    pub per_player: Vec<f64>,
    pub max: f64,
}

/// How far `p` is from a Nash equilibrium: for each player, its mixed cost
/// minus its cheapest pure deviation. `p` is an epsilon-NE for any epsilon at
/// or above `max`.
pub fn epsilon_of_profile(
    p: &MixedStrategyProfile,
    game: &GameTable,
    mode: &Mode,
) -> Result<EpsilonReport> {
    p.check_against(game)?;
    mode.check(game.num_players())?;
    let per_player: Vec<f64> = (0..game.num_players())
        .map(|i| {
            let q = beliefs(i, p, mode);
            let mixed = enumerate_expectation(game, i, &q);
            let best = contract_except(&game.costs[i], &game.dims, &q, i)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            // rounding between the two evaluation routes can leave a few ulps below zero
            (mixed - best).max(0.0)
        })
        .collect();
    let max = per_player.iter().copied().fold(0.0, f64::max);
    Ok(EpsilonReport { per_player, max })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn matching_pennies() -> GameTable {
        // player 1 wants to match, player 2 wants to mismatch
        GameTable::bimatrix(
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn action_set_validation() {
        assert!(ActionSet::new(vec![], 24).is_err());
        assert!(ActionSet::new(vec![19, 18], 24).is_err());
        assert!(ActionSet::new(vec![18, 18], 24).is_err());
        assert!(ActionSet::new(vec![18, 25], 24).is_err());
        let s = ActionSet::new(vec![18, 19, 20, 24], 24).unwrap();
        assert_eq!(s.position(20), Some(2));
        assert_eq!(s.position(21), None);
    }

    #[test]
    fn table_layout_round_trips() {
        let sets = vec![
            ActionSet::labels(2).unwrap(),
            ActionSet::labels(3).unwrap(),
            ActionSet::labels(4).unwrap(),
        ];
        let g = GameTable::from_fn(sets, 100, |a| {
            Ok(vec![(a[0] * 100 + a[1] * 10 + a[2]) as f64; 3])
        })
        .unwrap();
        assert_eq!(g.num_joint(), 24);
        for flat in 0..24 {
            assert_eq!(g.flat_index(&g.unravel(flat)), flat);
        }
        assert_eq!(g.cost(0, &[1, 2, 3]), 234.0);
        assert_eq!(g.cost_at_actions(1, &[1, 1, 4]).unwrap(), 114.0);
        assert!(g.cost_at_actions(1, &[1, 1, 5]).is_err());
    }

    #[test]
    fn table_cap_is_enforced() {
        let sets = vec![ActionSet::labels(4).unwrap(); 6];
        let err = GameTable::from_fn(sets, 4095, |_| Ok(vec![0.0; 6])).unwrap_err();
        assert!(matches!(err, DsmError::TableTooLarge { product: 4096, .. }));
        assert!(err.to_string().contains("4096"));
    }

    #[test]
    fn rejects_negative_costs() {
        assert!(GameTable::bimatrix(&[vec![-1.0]], &[vec![0.0]]).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(MixedStrategyProfile::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(MixedStrategyProfile::new(vec![vec![1.5, -0.5]]).is_err());
        assert!(MixedStrategyProfile::new(vec![vec![]]).is_err());
        assert!(MixedStrategyProfile::new(vec![vec![0.25; 4]]).is_ok());
        let err = MixedStrategyProfile::uniform(&[3]);
        assert_eq!(err.player(0).len(), 3);
    }

    #[test]
    fn prelec_fixed_points_and_value() {
        for &a in &[0.1, 0.3, 0.7, 1.0] {
            assert_eq!(prelec_weight(1.0, a).unwrap(), 1.0);
            assert_eq!(prelec_weight(0.0, a).unwrap(), 0.0);
            let inv_e = (-1.0f64).exp();
            assert!((prelec_weight(inv_e, a).unwrap() - inv_e).abs() < 1e-15);
        }
        // exp(-(ln 2)^0.7), evaluated independently to 20 digits
        assert!((prelec_weight(0.5, 0.7).unwrap() - 0.461_298_790_664_476_6).abs() < 1e-12);
        assert!(prelec_weight(1.1, 0.5).is_err());
        assert!(prelec_weight(0.5, 0.0).is_err());
        assert!(prelec_weight(0.5, 1.5).is_err());
    }

    #[test]
    fn eut_cost_hand_expansion() {
        let g = GameTable::bimatrix(
            &[vec![1.0, 2.0], vec![3.0, 4.0]],
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let p = MixedStrategyProfile::uniform(&[2, 2]);
        assert!((eut_cost(0, &p, &g).unwrap() - 2.5).abs() < 1e-15);
        let pure = MixedStrategyProfile::pure(&[2, 2], &[1, 0]).unwrap();
        assert_eq!(eut_cost(0, &pure, &g).unwrap(), 3.0);
    }

    #[test]
    fn pt_cost_two_player_expansion() {
        let g = GameTable::bimatrix(
            &[vec![1.0, 2.0], vec![3.0, 4.0]],
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let p = MixedStrategyProfile::new(vec![vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        let w = WeightingSpec::uniform(2, 0.7).unwrap();
        let w5 = prelec_weight(0.5, 0.7).unwrap();
        let expected = 0.25 * w5 * (1.0 + 2.0) + 0.75 * w5 * (3.0 + 4.0);
        assert!((pt_cost(0, &p, &g, &w).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.461_298_790_664_476_6 * 6.0).abs() < 1e-12);
    }

    #[test]
    fn pt_equals_eut_for_single_player() {
        let g = GameTable::from_costs(
            vec![ActionSet::labels(3).unwrap()],
            vec![vec![3.0, 1.0, 2.0]],
        )
        .unwrap();
        let p = MixedStrategyProfile::new(vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let w = WeightingSpec::uniform(1, 0.3).unwrap();
        assert_eq!(
            pt_cost(0, &p, &g, &w).unwrap(),
            eut_cost(0, &p, &g).unwrap()
        );
    }

    #[test]
    fn cond_cost_against_pure_opponent_is_table_entry() {
        let g = matching_pennies();
        let p = MixedStrategyProfile::pure(&[2, 2], &[0, 1]).unwrap();
        assert_eq!(cond_cost(0, 1, &p, &g, &Mode::Eut).unwrap(), 1.0);
        assert_eq!(cond_cost(0, 2, &p, &g, &Mode::Eut).unwrap(), 0.0);
        assert!(matches!(
            cond_cost(0, 3, &p, &g, &Mode::Eut),
            Err(DsmError::UnknownAction {
                player: 0,
                action: 3
            })
        ));
    }

    #[test]
    fn contraction_matches_enumeration_on_three_players() {
        let sets = vec![
            ActionSet::labels(2).unwrap(),
            ActionSet::labels(3).unwrap(),
            ActionSet::labels(2).unwrap(),
        ];
        let g = GameTable::from_fn(sets, 100, |a| {
            let s = (a[0] * 7 + a[1] * 3 + a[2] * 5) as f64;
            Ok(vec![s % 4.0, s % 5.0, s % 3.0])
        })
        .unwrap();
        let p =
            MixedStrategyProfile::new(vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.3], vec![0.9, 0.1]])
                .unwrap();
        for i in 0..3 {
            let cc = cond_costs(i, &p, &g, &Mode::Eut).unwrap();
            for (k, c) in cc.iter().enumerate() {
                let mut direct = 0.0;
                for flat in 0..g.num_joint() {
                    let idx = g.unravel(flat);
                    if idx[i] != k {
                        continue;
                    }
                    let w: f64 = (0..3)
                        .filter(|&l| l != i)
                        .map(|l| p.player(l)[idx[l]])
                        .product();
                    direct += w * g.player_costs(i)[flat];
                }
                assert!((c - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matching_pennies_uniform_is_exact_equilibrium() {
        let g = matching_pennies();
        let rep =
            epsilon_of_profile(&MixedStrategyProfile::uniform(&[2, 2]), &g, &Mode::Eut).unwrap();
        assert_eq!(rep.per_player, vec![0.0, 0.0]);

        let pure = MixedStrategyProfile::pure(&[2, 2], &[0, 0]).unwrap();
        let rep = epsilon_of_profile(&pure, &g, &Mode::Eut).unwrap();
        assert_eq!(rep.per_player, vec![0.0, 1.0]);
        assert_eq!(rep.max, 1.0);
    }

    #[test]
    fn single_action_game_has_zero_epsilon() {
        let g = GameTable::from_costs(
            vec![ActionSet::labels(1).unwrap(), ActionSet::labels(1).unwrap()],
            vec![vec![4.0], vec![2.0]],
        )
        .unwrap();
        let rep =
            epsilon_of_profile(&MixedStrategyProfile::uniform(&[1, 1]), &g, &Mode::Eut).unwrap();
        assert_eq!(rep.max, 0.0);
    }

    #[test]
    fn mode_alpha_count_must_match() {
        let g = matching_pennies();
        let p = MixedStrategyProfile::uniform(&[2, 2]);
        let w = WeightingSpec::uniform(3, 0.5).unwrap();
        assert!(epsilon_of_profile(&p, &g, &Mode::Pt(w.clone())).is_err());
        assert!(pt_cost(0, &p, &g, &w).is_err());
    }
}
