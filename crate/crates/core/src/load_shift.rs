//! Hourly demand model: baseline profiles, the utility's target profile, the
//! reduction cascade that pushes load into the following hour, and the
//! proportional price that turns a schedule into per-customer bills.
//!
//! Hours are 1-based throughout the public API (`1..=horizon`); vectors are
//! stored 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{DsmError, Result};

pub const DEFAULT_HORIZON: usize = 24;

/// One customer's baseline hourly demand in kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    customer_id: String,
    demand: Vec<f64>,
}

impl LoadProfile {
    pub fn new(customer_id: impl Into<String>, demand: Vec<f64>) -> Result<Self> {
        let customer_id = customer_id.into();
        if demand.len() < 2 {
            return Err(DsmError::invalid(format!(
                "profile {customer_id}: horizon must be at least 2 hours, got {}",
                demand.len()
            )));
        }
        if let Some((h, v)) = demand
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(DsmError::invalid(format!(
                "profile {customer_id}: demand at hour {} is {v}; must be finite and >= 0",
                h + 1
            )));
        }
        Ok(LoadProfile {
            customer_id,
            demand,
        })
    }

    pub fn customer_id(&self) -> &str {
        &self.customer_id
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    /// Demand at a 1-based hour.
    pub fn at(&self, hour: usize) -> f64 {
        self.demand[hour - 1]
    }

    pub fn daily_total(&self) -> f64 {
        self.demand.iter().sum()
    }
}

/// Per-hour demand the utility would like to see, in kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetProfile {
    target: Vec<f64>,
}

impl TargetProfile {
    pub fn new(target: Vec<f64>) -> Result<Self> {
        if let Some((h, v)) = target
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(DsmError::invalid(format!(
                "target at hour {} is {v}; must be finite and >= 0",
                h + 1
            )));
        }
        Ok(TargetProfile { target })
    }

    pub fn values(&self) -> &[f64] {
        &self.target
    }

    pub fn horizon(&self) -> usize {
        self.target.len()
    }
}

/// Scale the historical hourly totals at selected hours.
///
/// Hours not listed keep their historical value. A factor of 0.9 at one hour
/// asks for a 10% cut there.
pub fn build_target(historical: &[f64], multipliers: &[(usize, f64)]) -> Result<TargetProfile> {
    let horizon = historical.len();
    let mut target = historical.to_vec();
    for &(hour, factor) in multipliers {
        if hour == 0 || hour > horizon {
            return Err(DsmError::HourOutOfRange { hour, horizon });
        }
        if !factor.is_finite() || factor < 0.0 {
            return Err(DsmError::invalid(format!(
                "target factor at hour {hour} is {factor}; must be finite and >= 0"
            )));
        }
        target[hour - 1] = factor * historical[hour - 1];
    }
    TargetProfile::new(target)
}

/// Customer reduction factors, the price constant and the opt-out action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    gamma: Vec<f64>,
    price_scale: f64,
    sentinel_action: Option<usize>,
}

impl ShiftParams {
    /// `sentinel_action = None` means "the last hour of the horizon".
    pub fn new(gamma: Vec<f64>, price_scale: f64, sentinel_action: Option<usize>) -> Result<Self> {
        if let Some((i, g)) = gamma
            .iter()
            .enumerate()
            .find(|(_, g)| !(**g > 0.0 && **g <= 1.0))
        {
            return Err(DsmError::invalid(format!(
                "gamma for customer {i} is {g}; must lie in (0, 1]"
            )));
        }
        if !(price_scale.is_finite() && price_scale > 0.0) {
            return Err(DsmError::invalid(format!(
                "price scale B is {price_scale}; must be > 0"
            )));
        }
        if sentinel_action == Some(0) {
            return Err(DsmError::invalid("sentinel action must be a 1-based hour"));
        }
        Ok(ShiftParams {
            gamma,
            price_scale,
            sentinel_action,
        })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn price_scale(&self) -> f64 {
        self.price_scale
    }

    pub fn sentinel(&self, horizon: usize) -> usize {
        self.sentinel_action.unwrap_or(horizon)
    }

    pub fn with_price_scale(&self, price_scale: f64) -> Result<Self> {
        ShiftParams::new(self.gamma.clone(), price_scale, self.sentinel_action)
    }
}

/// Participation start hour chosen by each customer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn start_hours(&self) -> &[usize] {
        &self.0
    }
}

/// Demands after load shifting for one joint action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsmSchedule {
    /// Shifted demand per customer per hour.
    pub y: Vec<Vec<f64>>,
    /// Reduction per customer per hour, carried into the next hour.
    pub r: Vec<Vec<f64>>,
    /// Total load per hour including carry from the previous hour.
    pub l: Vec<f64>,
    /// Baseline total per hour.
    pub d: Vec<f64>,
}

impl DsmSchedule {
    pub fn horizon(&self) -> usize {
        self.d.len()
    }

    pub fn num_customers(&self) -> usize {
        self.y.len()
    }
}

/// Customers enrolled at `hour`: those whose start hour is at or before it,
/// excluding anyone holding the opt-out action.
pub fn participants_at(start_hours: &[usize], hour: usize, sentinel: usize) -> Vec<usize> {
    start_hours
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != sentinel && a <= hour)
        .map(|(i, _)| i)
        .collect()
}

/// Run the hour-by-hour reduction cascade for one joint action.
///
/// At each hour below the last, if the target is strictly below the load
/// (baseline plus carry), every enrolled customer cuts
/// `gamma_i * (x_i - avg)^+` where `avg` is the target minus non-participant
/// demand, split evenly among participants. The cut is capped at what the
/// customer actually has at that hour (its baseline plus its own carry) and
/// moves into the next hour. The last hour only absorbs carry.
pub fn shift_schedule(
    profiles: &[LoadProfile],
    target: &TargetProfile,
    params: &ShiftParams,
    action: &JointAction,
) -> Result<DsmSchedule> {
    let n = profiles.len();
    if n == 0 {
        return Err(DsmError::invalid("at least one customer is required"));
    }
    let horizon = profiles[0].horizon();
    if let Some(p) = profiles.iter().find(|p| p.horizon() != horizon) {
        return Err(DsmError::dim(format!(
            "profile {} has {} hours, expected {horizon}",
            p.customer_id(),
            p.horizon()
        )));
    }
    if target.horizon() != horizon {
        return Err(DsmError::dim(format!(
            "target has {} hours, profiles have {horizon}",
            target.horizon()
        )));
    }
    if params.gamma().len() != n {
        return Err(DsmError::dim(format!(
            "{} gamma values for {n} customers",
            params.gamma().len()
        )));
    }
    let starts = action.start_hours();
    if starts.len() != n {
        return Err(DsmError::dim(format!(
            "joint action has {} entries for {n} customers",
            starts.len()
        )));
    }
    if let Some(&hour) = starts.iter().find(|&&a| a == 0 || a > horizon) {
        return Err(DsmError::HourOutOfRange { hour, horizon });
    }
    Ok(cascade(profiles, target.values(), params, starts))
}

pub(crate) fn cascade(
    profiles: &[LoadProfile],
    target: &[f64],
    params: &ShiftParams,
    starts: &[usize],
) -> DsmSchedule {
    let n = profiles.len();
    let horizon = target.len();
    let sentinel = params.sentinel(horizon);
    let gamma = params.gamma();

    let d: Vec<f64> = (0..horizon)
        .map(|h| profiles.iter().map(|p| p.demand[h]).sum())
        .collect();
    let mut y = vec![vec![0.0; horizon]; n];
    let mut r = vec![vec![0.0; horizon]; n];
    let mut l = vec![0.0; horizon];
    let mut enrolled = vec![false; n];

    for h in 0..horizon {
        let hour = h + 1;
        let carry: Vec<f64> = (0..n)
            .map(|i| if h == 0 { 0.0 } else { r[i][h - 1] })
            .collect();
        let carried: f64 = carry.iter().sum();
        l[h] = d[h] + carried;

        if hour < horizon && target[h] < l[h] {
            let mut count = 0usize;
            let mut outside = 0.0;
            for (i, &a) in starts.iter().enumerate() {
                enrolled[i] = a != sentinel && a <= hour;
                if enrolled[i] {
                    count += 1;
                } else {
                    outside += profiles[i].demand[h];
                }
            }
            if count > 0 {
                let avg = (target[h] - outside) / count as f64;
                for i in 0..n {
                    if enrolled[i] {
                        let x = profiles[i].demand[h];
                        let cut = gamma[i] * (x - avg).max(0.0);
                        r[i][h] = cut.min(x + carry[i]);
                    }
                }
            }
        }

        for i in 0..n {
            y[i][h] = profiles[i].demand[h] + carry[i] - r[i][h];
        }
    }

    DsmSchedule { y, r, l, d }
}

/// Per-unit price for a customer holding `own` of `total` demand.
pub fn price(total: f64, own: f64, price_scale: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        price_scale * own / total
    }
}

/// Daily bill of customer `i`: the sum over hours of price times own demand.
pub fn bill(schedule: &DsmSchedule, i: usize, price_scale: f64) -> f64 {
    (0..schedule.horizon())
        .map(|h| {
            let total: f64 = schedule.y.iter().map(|yj| yj[h]).sum();
            let own = schedule.y[i][h];
            price(total, own, price_scale) * own
        })
        .sum()
}

/// All customers' bills for a schedule.
pub fn bills(schedule: &DsmSchedule, price_scale: f64) -> Vec<f64> {
    let horizon = schedule.horizon();
    let totals: Vec<f64> = (0..horizon)
        .map(|h| schedule.y.iter().map(|yj| yj[h]).sum())
        .collect();
    schedule
        .y
        .iter()
        .map(|yi| {
            yi.iter()
                .zip(&totals)
                .map(|(&own, &total)| price(total, own, price_scale) * own)
                .sum()
        })
        .collect()
}
