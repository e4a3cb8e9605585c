//! Seedable synthetic-city generator.
//!
//! Produces ground-truthed survey-style (one labeled day per person) and
//! card-style (multi-day, unlabeled) datasets at desk scale. Agents carry
//! socio-economic attributes drawn to match configured marginals; their
//! schedules follow job-status templates (commuters go home->work in the
//! morning and back in the evening, retirees make mid-day outings), so the
//! qualitative signals the inference pipeline looks for are actually in the
//! data: anchor regularity, POI composition at destinations, jobs-housing
//! land price, and first-trip timing.
//!
//! Everything is driven by one seed. The city (stations, rasters) and the
//! agent plans are drawn sequentially; per-agent trip generation runs in
//! parallel on per-agent RNG streams, so outputs are byte-identical for a
//! given seed regardless of thread count.

use chrono::NaiveDate;
use rand::distributions::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    GridSpec, PoiTable, RasterRow, RideRecord, SurveyPerson, SurveyRecord, SurveyTrip,
};
use crate::metrics::{classification_report, ClassificationReport};
use crate::pipeline::{AgeBand, Gender, IncomeBand, JobStatus, Purpose, SocioAttributes};

/// Generator configuration. Attribute and purpose marginal defaults follow
/// the survey composition the pipeline is calibrated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub cell_km: f64,
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub stations: usize,
    pub survey_users: usize,
    pub card_users: usize,
    /// Observation days for card users; survey users report one day.
    pub days: usize,
    pub start_date: NaiveDate,
    /// (Under20, 20-59, Over60)
    pub age_marginals: [f64; 3],
    /// (WithJob, Student, RetiredNoJob)
    pub job_marginals: [f64; 3],
    /// (Zero, 0-10, 10-15, Over15)
    pub income_marginals: [f64; 4],
    /// (Work, Home, S&E, Medical)
    pub purpose_marginals: [f64; 4],
    /// Departure-time jitter, minutes (1 sigma).
    pub time_jitter_min: f64,
    /// Fraction of agent-days whose first trip starts away from home.
    pub non_anchor_trip_rate: f64,
    /// Fraction of trips split into two rides with a short transfer gap.
    pub transfer_rate: f64,
    /// Fraction of stations absent from poi.csv.
    pub missing_poi_rate: f64,
    /// Fraction of survey respondents with a workplace who leave the
    /// home/work fields blank (non-response); they train the no-anchor model.
    pub survey_missing_anchor_rate: f64,
    /// Fraction of retiree days without travel.
    pub retiree_stay_home_rate: f64,
    /// Distribution shift applied to the card population only: departure
    /// means move later by `shift * 90 min` and jitter grows by `1 + shift`.
    pub covariate_shift: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            grid_nx: 20,
            grid_ny: 20,
            cell_km: 1.0,
            origin_lon: 120.0,
            origin_lat: 30.0,
            stations: 60,
            survey_users: 400,
            card_users: 500,
            days: 5,
            start_date: NaiveDate::from_ymd_opt(2023, 10, 9).expect("valid date"),
            age_marginals: [0.173, 0.800, 0.027],
            job_marginals: [0.698, 0.156, 0.146],
            income_marginals: [0.118, 0.606, 0.198, 0.078],
            purpose_marginals: [0.414, 0.485, 0.096, 0.005],
            time_jitter_min: 20.0,
            non_anchor_trip_rate: 0.05,
            transfer_rate: 0.15,
            missing_poi_rate: 0.05,
            survey_missing_anchor_rate: 0.25,
            retiree_stay_home_rate: 0.0,
            covariate_shift: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let check_simplex = |name: &str, m: &[f64]| -> Result<()> {
            if m.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidConfig(format!("{name} entries must be in [0,1]")));
            }
            let sum: f64 = m.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("{name} sums to {sum}, expected 1")));
            }
            Ok(())
        };
        check_simplex("age_marginals", &self.age_marginals)?;
        check_simplex("job_marginals", &self.job_marginals)?;
        check_simplex("income_marginals", &self.income_marginals)?;
        check_simplex("purpose_marginals", &self.purpose_marginals)?;
        for (name, v) in [
            ("non_anchor_trip_rate", self.non_anchor_trip_rate),
            ("transfer_rate", self.transfer_rate),
            ("missing_poi_rate", self.missing_poi_rate),
            ("survey_missing_anchor_rate", self.survey_missing_anchor_rate),
            ("retiree_stay_home_rate", self.retiree_stay_home_rate),
            ("covariate_shift", self.covariate_shift),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} {v} outside [0,1]")));
            }
        }
        if self.grid_nx < 4 || self.grid_ny < 4 {
            return Err(Error::InvalidConfig("grid must be at least 4x4 cells".into()));
        }
        if self.days == 0 {
            return Err(Error::InvalidConfig("days must be >= 1".into()));
        }
        if self.time_jitter_min < 0.0 {
            return Err(Error::InvalidConfig("time_jitter_min must be >= 0".into()));
        }
        // Five roles need representation; anchors cannot outnumber stations.
        if self.stations < 10 {
            return Err(Error::InvalidConfig(format!(
                "need at least 10 stations for all roles, got {}",
                self.stations
            )));
        }
        derive_trip_rates(self).map(|_| ())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::from_dims(
            self.origin_lon,
            self.origin_lat,
            self.grid_nx,
            self.grid_ny,
            self.cell_km,
        )
    }
}

/// Hidden ground truth for one card trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub user_id: String,
    pub date: NaiveDate,
    /// 1-based position of the trip within the user's day, by departure.
    pub trip_seq: usize,
    pub purpose: Purpose,
    pub age_band: AgeBand,
    pub job_status: JobStatus,
    pub income_band: IncomeBand,
}

/// Everything the generator emits.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub rides: Vec<RideRecord>,
    pub survey: Vec<SurveyRecord>,
    pub poi: PoiTable,
    pub population: Vec<RasterRow>,
    pub land_price: Vec<RasterRow>,
    pub grid_spec: GridSpec,
    pub truth: Vec<TruthRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StationRole {
    Residential,
    Business,
    Mall,
    Hospital,
    Campus,
}

#[derive(Debug, Clone)]
struct Station {
    id: String,
    role: StationRole,
    km: (f64, f64),
    lonlat: (f64, f64),
}

struct City {
    stations: Vec<Station>,
    residential: Vec<usize>,
    business: Vec<usize>,
    malls: Vec<usize>,
    hospitals: Vec<usize>,
    campuses: Vec<usize>,
    /// Residential station indices sorted ascending by cell land price.
    residential_by_price: Vec<usize>,
    population: Vec<RasterRow>,
    land_price: Vec<RasterRow>,
    poi: PoiTable,
    spec: GridSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DayKind {
    Commute,
    CommuteExtraSe,
    CommuteExtraMed,
    OutingSe,
    OutingMed,
    StayHome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AgentKind {
    Survey,
    Card,
}

#[derive(Debug, Clone)]
struct AgentPlan {
    index: usize,
    id: String,
    kind: AgentKind,
    job: JobStatus,
    age: AgeBand,
    income: IncomeBand,
    gender: Gender,
    car: bool,
    home_station: usize,
    work_station: Option<usize>,
    survey_masked: bool,
    days: Vec<DayKind>,
    noise_days: Vec<bool>,
}

/// Per-worker-day extra-activity rates and retiree outing mix derived from
/// the purpose marginals and the job mix. Work and Home shares are implied
/// by the job mix; S&E and Medical are matched exactly.
#[derive(Debug, Clone, Copy)]
struct TripRates {
    extra_se: f64,
    extra_med: f64,
    retiree_med: f64,
}

fn derive_trip_rates(config: &SynthConfig) -> Result<TripRates> {
    let [p_work, p_home, p_se, p_med] = config.purpose_marginals;
    if p_home <= 0.0 || p_work <= 0.0 {
        return Err(Error::InvalidConfig(
            "purpose marginals need positive work and home shares".into(),
        ));
    }
    let commuters = config.job_marginals[0] + config.job_marginals[1];
    let outing_weight = config.job_marginals[2] * (1.0 - config.retiree_stay_home_rate);
    let total = commuters + outing_weight;
    if total <= 0.0 || commuters <= 0.0 {
        return Err(Error::InvalidConfig("no traveling population".into()));
    }
    let w_share = commuters / total;
    let r_share = outing_weight / total;

    let implied_r = 1.0 - p_work / p_home;
    if (r_share - implied_r).abs() > 0.05 {
        return Err(Error::InvalidConfig(format!(
            "job mix and purpose marginals are inconsistent: outing-day share {r_share:.3} \
             vs {implied_r:.3} implied by work/home shares"
        )));
    }

    let t_total = 1.0 / p_home;
    let se_needed = p_se * t_total;
    let med_needed = p_med * t_total;

    // Workers see a doctor far less often than retirees per travel day.
    const WORKER_MED_RATIO: f64 = 0.05;
    let retiree_med = if r_share > 0.0 {
        (med_needed / (r_share + w_share * WORKER_MED_RATIO)).min(0.95)
    } else {
        0.0
    };
    let extra_med = retiree_med * WORKER_MED_RATIO;
    let extra_se = (se_needed - r_share * (1.0 - retiree_med)) / w_share;
    if !(0.0..=0.85).contains(&extra_se) || !(0.0..=0.2).contains(&extra_med) {
        return Err(Error::InvalidConfig(format!(
            "infeasible purpose marginals: derived extra trip rates se={extra_se:.3} med={extra_med:.3}"
        )));
    }
    Ok(TripRates {
        extra_se,
        extra_med,
        retiree_med,
    })
}

/// Largest-remainder apportionment of `n` slots over `rates`.
fn quota_counts(n: usize, rates: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = rates.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|v| v.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for k in 0..n.saturating_sub(assigned) {
        counts[order[k % rates.len()]] += 1;
    }
    counts
}

/// Assign one category per slot with category shares following `rates`
/// exactly (up to rounding), in a seeded random arrangement.
fn quota_assign(n: usize, rates: &[f64], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let counts = quota_counts(n, rates);
    let mut assignment = Vec::with_capacity(n);
    for (cat, &count) in counts.iter().enumerate() {
        assignment.extend(std::iter::repeat(cat).take(count));
    }
    assignment.shuffle(rng);
    assignment
}

/// Iterative proportional fitting: rescale `joint` until its row sums match
/// `row_marginals` and column sums match `col_marginals`. Structural zeros
/// in the seed matrix are preserved.
fn ipf_fit(joint: &mut [Vec<f64>], row_marginals: &[f64], col_marginals: &[f64]) {
    for _ in 0..60 {
        for (r, row) in joint.iter_mut().enumerate() {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                for v in row.iter_mut() {
                    *v *= row_marginals[r] / sum;
                }
            }
        }
        for c in 0..col_marginals.len() {
            let sum: f64 = joint.iter().map(|row| row[c]).sum();
            if sum > 0.0 {
                for row in joint.iter_mut() {
                    row[c] *= col_marginals[c] / sum;
                }
            }
        }
    }
}

/// Conditional distributions P(col | row) from an IPF-fitted joint.
fn conditional_from_ipf(
    affinity: &[Vec<f64>],
    row_marginals: &[f64],
    col_marginals: &[f64],
) -> Vec<Vec<f64>> {
    let mut joint: Vec<Vec<f64>> = affinity.to_vec();
    ipf_fit(&mut joint, row_marginals, col_marginals);
    joint
        .into_iter()
        .map(|row| {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.into_iter().map(|v| v / sum).collect()
            } else {
                vec![0.0; col_marginals.len()]
            }
        })
        .collect()
}

fn trunc_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo < hi);
    let clamped_mean = mean.clamp(lo, hi);
    if sd <= 0.0 {
        return clamped_mean;
    }
    let dist = Normal::new(clamped_mean, sd).expect("valid normal");
    for _ in 0..64 {
        let v = dist.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    clamped_mean
}

const HOUR: f64 = 3600.0;
const BUS_SPEED_KMH: f64 = 18.0;

fn base_poi_profile(role: StationRole) -> [f64; 7] {
    // [catering, education, leisure, shopping, hospital, company, residence]
    match role {
        StationRole::Residential => [0.10, 0.06, 0.05, 0.08, 0.01, 0.06, 0.58],
        StationRole::Business => [0.16, 0.03, 0.05, 0.10, 0.01, 0.52, 0.08],
        StationRole::Mall => [0.22, 0.02, 0.20, 0.42, 0.01, 0.05, 0.04],
        StationRole::Hospital => [0.10, 0.03, 0.03, 0.06, 0.55, 0.05, 0.12],
        StationRole::Campus => [0.12, 0.55, 0.08, 0.06, 0.02, 0.04, 0.08],
    }
}

fn build_city(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<City> {
    let spec = config.grid_spec()?;
    let center = (
        config.grid_nx as f64 * config.cell_km / 2.0,
        config.grid_ny as f64 * config.cell_km / 2.0,
    );
    let width = config.grid_nx as f64 * config.cell_km;
    let height = config.grid_ny as f64 * config.cell_km;
    let max_radius = (width.min(height) / 2.0 - 0.4).max(1.0);

    // Role mix: residential half, the rest split across activity roles.
    let role_counts = quota_counts(config.stations, &[0.50, 0.20, 0.13, 0.07, 0.10]);
    let roles = [
        StationRole::Residential,
        StationRole::Business,
        StationRole::Mall,
        StationRole::Hospital,
        StationRole::Campus,
    ];
    if role_counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidConfig(
            "too few stations to cover every station role".into(),
        ));
    }

    let radius_range = |role: StationRole| -> (f64, f64) {
        let (lo, hi) = match role {
            StationRole::Business => (0.05, 0.28),
            StationRole::Mall => (0.10, 0.45),
            StationRole::Hospital => (0.18, 0.62),
            StationRole::Campus => (0.25, 0.72),
            StationRole::Residential => (0.25, 0.95),
        };
        (lo * max_radius, hi * max_radius)
    };

    let mut stations = Vec::with_capacity(config.stations);
    let mut counter = 0usize;
    for (role, &count) in roles.iter().zip(&role_counts) {
        for _ in 0..count {
            let (r_lo, r_hi) = radius_range(*role);
            let radius = rng.gen_range(r_lo..r_hi);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = (center.0 + radius * angle.cos()).clamp(0.25, width - 0.25);
            let y = (center.1 + radius * angle.sin()).clamp(0.25, height - 0.25);
            counter += 1;
            stations.push(Station {
                id: format!("T{counter:03}"),
                role: *role,
                km: (x, y),
                lonlat: spec.lonlat_at_km(x, y),
            });
        }
    }

    let by_role = |role: StationRole| -> Vec<usize> {
        stations
            .iter()
            .enumerate()
            .filter(|(_, s)| s.role == role)
            .map(|(i, _)| i)
            .collect()
    };
    let residential = by_role(StationRole::Residential);
    let business = by_role(StationRole::Business);
    let malls = by_role(StationRole::Mall);
    let hospitals = by_role(StationRole::Hospital);
    let campuses = by_role(StationRole::Campus);

    // Rasters: land price peaks at the center; population peaks where
    // residential stations sit.
    let mut population = Vec::with_capacity(config.grid_nx * config.grid_ny);
    let mut land_price = Vec::with_capacity(config.grid_nx * config.grid_ny);
    for y in 0..config.grid_ny {
        for x in 0..config.grid_nx {
            let cx = (x as f64 + 0.5) * config.cell_km;
            let cy = (y as f64 + 0.5) * config.cell_km;
            let d2 = (cx - center.0).powi(2) + (cy - center.1).powi(2);
            let lp = 52_000.0 * (-d2 / (2.0 * 25.0)).exp()
                + 8_000.0
                + rng.gen_range(-1_500.0..1_500.0);
            let mut pop = 9_000.0 * (-d2 / (2.0 * 49.0)).exp() + 400.0;
            for &ri in &residential {
                let sd2 = (cx - stations[ri].km.0).powi(2) + (cy - stations[ri].km.1).powi(2);
                pop += 5_000.0 * (-sd2 / (2.0 * 2.25)).exp();
            }
            pop += rng.gen_range(0.0..400.0);
            population.push(RasterRow {
                x_index: x,
                y_index: y,
                value: (pop * 1000.0).round() / 1000.0,
            });
            land_price.push(RasterRow {
                x_index: x,
                y_index: y,
                value: (lp.max(500.0) * 1000.0).round() / 1000.0,
            });
        }
    }

    // POI profiles, minus a quota of stations missing from the table.
    let missing_flags = quota_assign(
        stations.len(),
        &[1.0 - config.missing_poi_rate, config.missing_poi_rate],
        rng,
    );
    let mut poi = PoiTable::new();
    for (i, station) in stations.iter().enumerate() {
        if missing_flags[i] == 1 {
            continue;
        }
        let mut props = base_poi_profile(station.role);
        for p in props.iter_mut() {
            *p = (*p + rng.gen_range(-0.015..0.015)).max(0.0);
        }
        let sum: f64 = props.iter().sum();
        if sum > 0.98 {
            for p in props.iter_mut() {
                *p *= 0.96 / sum;
            }
        }
        for p in props.iter_mut() {
            *p = (*p * 1e6).round() / 1e6;
        }
        poi.insert(station.id.clone(), props);
    }

    // Rank residential stations by their cell's land price for the
    // income -> home-location coupling.
    let cell_lp = |km: (f64, f64)| -> f64 {
        let x = ((km.0 / config.cell_km) as usize).min(config.grid_nx - 1);
        let y = ((km.1 / config.cell_km) as usize).min(config.grid_ny - 1);
        land_price[y * config.grid_nx + x].value
    };
    let mut residential_by_price = residential.clone();
    residential_by_price.sort_by(|&a, &b| {
        cell_lp(stations[a].km)
            .total_cmp(&cell_lp(stations[b].km))
            .then(a.cmp(&b))
    });

    Ok(City {
        stations,
        residential,
        business,
        malls,
        hospitals,
        campuses,
        residential_by_price,
        population,
        land_price,
        poi,
        spec,
    })
}

/// Income band -> rank-quantile window over residential stations ordered by
/// land price. High earners live where land is expensive.
fn home_window(income: IncomeBand) -> (f64, f64) {
    match income {
        IncomeBand::Zero => (0.00, 0.45),
        IncomeBand::ZeroTo10 => (0.10, 0.70),
        IncomeBand::TenTo15 => (0.45, 0.92),
        IncomeBand::Over15 => (0.70, 1.00),
    }
}

fn build_plans(
    config: &SynthConfig,
    city: &City,
    rates: TripRates,
    rng: &mut ChaCha8Rng,
) -> Vec<AgentPlan> {
    // Age-given-job and income-given-job conditionals fitted to the
    // configured marginals over a fixed affinity structure (students skew
    // young, retirees old and low-income).
    let age_affinity = vec![
        vec![0.25, 1.00, 0.04], // WithJob
        vec![14.0, 0.33, 0.00], // Student
        vec![0.00, 0.55, 14.0], // RetiredNoJob
    ];
    let income_affinity = vec![
        vec![0.05, 1.00, 1.00, 1.00], // WithJob
        vec![1.00, 0.25, 0.02, 0.01], // Student
        vec![1.00, 0.45, 0.05, 0.02], // RetiredNoJob
    ];
    let age_given_job =
        conditional_from_ipf(&age_affinity, &config.job_marginals, &config.age_marginals);
    let income_given_job = conditional_from_ipf(
        &income_affinity,
        &config.job_marginals,
        &config.income_marginals,
    );

    let mut plans = Vec::with_capacity(config.survey_users + config.card_users);
    let mut global_index = 0usize;
    for (kind, count, days) in [
        (AgentKind::Survey, config.survey_users, 1usize),
        (AgentKind::Card, config.card_users, config.days),
    ] {
        let jobs = quota_assign(count, &config.job_marginals, rng);
        // Per-job-group quota draws keep the conditionals tight.
        let mut members_by_job: Vec<Vec<usize>> = vec![Vec::new(); 3];
        for (i, &j) in jobs.iter().enumerate() {
            members_by_job[j].push(i);
        }
        let mut ages = vec![AgeBand::From20To59; count];
        let mut incomes = vec![IncomeBand::ZeroTo10; count];
        for (job, members) in members_by_job.iter().enumerate() {
            let age_assign = quota_assign(members.len(), &age_given_job[job], rng);
            let income_assign = quota_assign(members.len(), &income_given_job[job], rng);
            for (k, &m) in members.iter().enumerate() {
                ages[m] = AgeBand::from_index(age_assign[k]).expect("3 bands");
                incomes[m] = IncomeBand::from_index(income_assign[k]).expect("4 bands");
            }
        }

        let masked_flags: Vec<bool> = if kind == AgentKind::Survey {
            quota_assign(
                count,
                &[
                    1.0 - config.survey_missing_anchor_rate,
                    config.survey_missing_anchor_rate,
                ],
                rng,
            )
            .into_iter()
            .map(|c| c == 1)
            .collect()
        } else {
            vec![false; count]
        };

        let mut population_plans = Vec::with_capacity(count);
        for i in 0..count {
            let job = JobStatus::from_index(jobs[i]).expect("3 statuses");
            let income = incomes[i];
            let (q_lo, q_hi) = home_window(income);
            let n_res = city.residential_by_price.len();
            let lo = ((q_lo * n_res as f64) as usize).min(n_res - 1);
            let hi = ((q_hi * n_res as f64).ceil() as usize).clamp(lo + 1, n_res);
            let home_station = city.residential_by_price[rng.gen_range(lo..hi)];
            let work_station = match job {
                JobStatus::WithJob => Some(city.business[rng.gen_range(0..city.business.len())]),
                JobStatus::Student => Some(city.campuses[rng.gen_range(0..city.campuses.len())]),
                JobStatus::RetiredNoJob => None,
            };
            let prefix = match kind {
                AgentKind::Survey => 'S',
                AgentKind::Card => 'C',
            };
            population_plans.push(AgentPlan {
                index: global_index,
                id: format!("{prefix}{:05}", i + 1),
                kind,
                job,
                age: ages[i],
                income,
                gender: if rng.gen_bool(0.48) {
                    Gender::Male
                } else {
                    Gender::Female
                },
                car: rng.gen_bool(0.327),
                home_station,
                work_station,
                survey_masked: masked_flags[i],
                days: vec![DayKind::Commute; days],
                noise_days: vec![false; days],
            });
            global_index += 1;
        }

        // Day plans. Commuter days get extra-activity quotas; retiree days
        // split into SE outings, medical outings, and stay-home days.
        let mut commuter_slots = Vec::new();
        let mut retiree_slots = Vec::new();
        for (p, plan) in population_plans.iter().enumerate() {
            for d in 0..plan.days.len() {
                match plan.job {
                    JobStatus::RetiredNoJob => retiree_slots.push((p, d)),
                    _ => commuter_slots.push((p, d)),
                }
            }
        }
        let commuter_kinds = quota_assign(
            commuter_slots.len(),
            &[
                1.0 - rates.extra_se - rates.extra_med,
                rates.extra_se,
                rates.extra_med,
            ],
            rng,
        );
        // Guarantee a few commuter medical days so the two-class model of
        // anchored users always sees both classes.
        let mut commuter_kinds = commuter_kinds;
        let med_present = commuter_kinds.iter().filter(|&&k| k == 2).count();
        if med_present < 2 && commuter_slots.len() >= 8 {
            let mut fixed = 0;
            for k in commuter_kinds.iter_mut() {
                if *k == 0 {
                    *k = 2;
                    fixed += 1;
                    if med_present + fixed >= 2 {
                        break;
                    }
                }
            }
        }
        for (slot, &(p, d)) in commuter_slots.iter().enumerate() {
            population_plans[p].days[d] = match commuter_kinds[slot] {
                0 => DayKind::Commute,
                1 => DayKind::CommuteExtraSe,
                _ => DayKind::CommuteExtraMed,
            };
        }

        let stay = config.retiree_stay_home_rate;
        let retiree_kinds = quota_assign(
            retiree_slots.len(),
            &[
                (1.0 - stay) * (1.0 - rates.retiree_med),
                (1.0 - stay) * rates.retiree_med,
                stay,
            ],
            rng,
        );
        let mut retiree_kinds = retiree_kinds;
        let med_present = retiree_kinds.iter().filter(|&&k| k == 1).count();
        if med_present < 2 && retiree_slots.len() >= 8 {
            let mut fixed = 0;
            for k in retiree_kinds.iter_mut() {
                if *k == 0 {
                    *k = 1;
                    fixed += 1;
                    if med_present + fixed >= 2 {
                        break;
                    }
                }
            }
        }
        for (slot, &(p, d)) in retiree_slots.iter().enumerate() {
            population_plans[p].days[d] = match retiree_kinds[slot] {
                0 => DayKind::OutingSe,
                1 => DayKind::OutingMed,
                _ => DayKind::StayHome,
            };
        }

        // Noise flag: the day's first boarding happens away from home.
        let all_slots: Vec<(usize, usize)> = commuter_slots
            .iter()
            .chain(retiree_slots.iter())
            .copied()
            .collect();
        let noise_flags = quota_assign(
            all_slots.len(),
            &[1.0 - config.non_anchor_trip_rate, config.non_anchor_trip_rate],
            rng,
        );
        for (slot, &(p, d)) in all_slots.iter().enumerate() {
            population_plans[p].noise_days[d] = noise_flags[slot] == 1;
        }

        plans.extend(population_plans);
    }
    plans
}

/// One generated trip before it is split into rides.
struct PlannedTrip {
    day: usize,
    dep: u32,
    arr: u32,
    origin: usize,
    dest: usize,
    purpose: Purpose,
    split_transfer: bool,
}

struct AgentOutput {
    rides: Vec<RideRecord>,
    survey: Option<SurveyRecord>,
    truth: Vec<TruthRecord>,
}

fn station_distance(city: &City, a: usize, b: usize) -> f64 {
    let (ax, ay) = city.stations[a].km;
    let (bx, by) = city.stations[b].km;
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

fn ride_seconds(city: &City, a: usize, b: usize, rng: &mut ChaCha8Rng) -> f64 {
    let base = station_distance(city, a, b) / BUS_SPEED_KMH * HOUR;
    (base + trunc_normal(rng, 0.0, 240.0, -600.0, 600.0)).clamp(360.0, 1.5 * HOUR)
}

/// Transfer stop: the station closest to the leg midpoint, excluding the
/// endpoints.
fn transfer_stop(city: &City, a: usize, b: usize) -> Option<usize> {
    let (ax, ay) = city.stations[a].km;
    let (bx, by) = city.stations[b].km;
    let mid = ((ax + bx) / 2.0, (ay + by) / 2.0);
    city.stations
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != a && *i != b)
        .min_by(|(i, s), (j, t)| {
            let ds = (s.km.0 - mid.0).powi(2) + (s.km.1 - mid.1).powi(2);
            let dt = (t.km.0 - mid.0).powi(2) + (t.km.1 - mid.1).powi(2);
            ds.total_cmp(&dt).then(i.cmp(j))
        })
        .map(|(i, _)| i)
}

fn generate_agent(config: &SynthConfig, city: &City, rates: &TripRates, plan: &AgentPlan) -> AgentOutput {
    let _ = rates;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(plan.index as u64 + 1);

    let shift = if plan.kind == AgentKind::Card {
        config.covariate_shift
    } else {
        0.0
    };
    let delta = shift * 1.5 * HOUR;
    let sigma = config.time_jitter_min * 60.0 * (1.0 + shift);

    let mut trips: Vec<PlannedTrip> = Vec::new();
    for (day, &kind) in plan.days.iter().enumerate() {
        if kind == DayKind::StayHome {
            continue;
        }
        let noise = plan.noise_days[day];
        let start_station = if noise {
            // Overnight stay elsewhere: depart from another residential stop.
            let mut pick = city.residential[rng.gen_range(0..city.residential.len())];
            if pick == plan.home_station && city.residential.len() > 1 {
                pick = city.residential[(city.residential.iter().position(|&s| s == pick).unwrap() + 1) % city.residential.len()];
            }
            pick
        } else {
            plan.home_station
        };

        let mut day_trips: Vec<PlannedTrip> = Vec::new();
        match kind {
            DayKind::Commute | DayKind::CommuteExtraSe | DayKind::CommuteExtraMed => {
                let work = plan.work_station.expect("commuters have a workplace");
                let (dep_mean, dep_lo, dep_hi, ret_mean, ret_lo, ret_hi) =
                    if plan.job == JobStatus::Student {
                        (7.2, 5.5, 10.5, 16.6, 15.26, 20.5)
                    } else {
                        (7.5, 5.0, 11.0, 18.0, 15.26, 21.3)
                    };
                let dep1 = trunc_normal(
                    &mut rng,
                    dep_mean * HOUR + delta,
                    sigma,
                    dep_lo * HOUR,
                    dep_hi * HOUR,
                );
                let ride1 = ride_seconds(city, start_station, work, &mut rng);
                day_trips.push(PlannedTrip {
                    day,
                    dep: dep1 as u32,
                    arr: (dep1 + ride1) as u32,
                    origin: start_station,
                    dest: work,
                    purpose: Purpose::Work,
                    split_transfer: false,
                });

                // Days with an evening stopover leave work early enough that
                // the stopover chain (ride + 75 min dwell minimum) always
                // finishes before the last-departure cap; otherwise the
                // capped final trip could overlap the previous one and merge.
                let ret_cap: f64 = if kind == DayKind::Commute {
                    ret_hi
                } else {
                    f64::min(ret_hi, 19.2)
                };
                let ret_dep = trunc_normal(
                    &mut rng,
                    (ret_mean * HOUR + delta).min(ret_cap * HOUR),
                    sigma * 1.2,
                    ret_lo * HOUR,
                    ret_cap * HOUR,
                )
                .max(dep1 + ride1 + 1.25 * HOUR);
                match kind {
                    DayKind::Commute => {
                        let ride2 = ride_seconds(city, work, plan.home_station, &mut rng);
                        day_trips.push(PlannedTrip {
                            day,
                            dep: ret_dep as u32,
                            arr: (ret_dep + ride2) as u32,
                            origin: work,
                            dest: plan.home_station,
                            purpose: Purpose::Home,
                            split_transfer: false,
                        });
                    }
                    DayKind::CommuteExtraSe | DayKind::CommuteExtraMed => {
                        let (stopover, purpose) = if kind == DayKind::CommuteExtraSe {
                            (city.malls[rng.gen_range(0..city.malls.len())], Purpose::Se)
                        } else {
                            (
                                city.hospitals[rng.gen_range(0..city.hospitals.len())],
                                Purpose::Medical,
                            )
                        };
                        let ride2 = ride_seconds(city, work, stopover, &mut rng);
                        day_trips.push(PlannedTrip {
                            day,
                            dep: ret_dep as u32,
                            arr: (ret_dep + ride2) as u32,
                            origin: work,
                            dest: stopover,
                            purpose,
                            split_transfer: false,
                        });
                        let dwell = trunc_normal(&mut rng, 1.5 * HOUR, 0.3 * HOUR, 1.25 * HOUR, 2.5 * HOUR);
                        let dep3 = (ret_dep + ride2 + dwell).min(22.2 * HOUR);
                        let ride3 = ride_seconds(city, stopover, plan.home_station, &mut rng);
                        day_trips.push(PlannedTrip {
                            day,
                            dep: dep3 as u32,
                            arr: (dep3 + ride3) as u32,
                            origin: stopover,
                            dest: plan.home_station,
                            purpose: Purpose::Home,
                            split_transfer: false,
                        });
                    }
                    _ => unreachable!(),
                }
            }
            DayKind::OutingSe | DayKind::OutingMed => {
                let (dest, purpose) = if kind == DayKind::OutingSe {
                    (city.malls[rng.gen_range(0..city.malls.len())], Purpose::Se)
                } else {
                    (
                        city.hospitals[rng.gen_range(0..city.hospitals.len())],
                        Purpose::Medical,
                    )
                };
                let out_dep = trunc_normal(
                    &mut rng,
                    9.5 * HOUR + delta,
                    sigma * 2.0,
                    6.5 * HOUR,
                    11.2 * HOUR,
                );
                let ride1 = ride_seconds(city, start_station, dest, &mut rng);
                day_trips.push(PlannedTrip {
                    day,
                    dep: out_dep as u32,
                    arr: (out_dep + ride1) as u32,
                    origin: start_station,
                    dest,
                    purpose,
                    split_transfer: false,
                });
                let dwell = trunc_normal(&mut rng, 2.0 * HOUR, 0.5 * HOUR, 1.25 * HOUR, 3.5 * HOUR);
                let back_dep = (out_dep + ride1 + dwell).min(14.7 * HOUR);
                let ride2 = ride_seconds(city, dest, plan.home_station, &mut rng);
                day_trips.push(PlannedTrip {
                    day,
                    dep: back_dep as u32,
                    arr: (back_dep + ride2) as u32,
                    origin: dest,
                    dest: plan.home_station,
                    purpose: Purpose::Home,
                    split_transfer: false,
                });
            }
            DayKind::StayHome => unreachable!(),
        }
        trips.extend(day_trips);
    }

    // Transfer splitting decided per trip from the agent stream; long trips
    // only, so both legs stay plausible.
    for trip in trips.iter_mut() {
        if trip.arr - trip.dep >= 1500 && rng.gen_bool(config.transfer_rate) {
            trip.split_transfer = true;
        }
    }

    // Emit rides, survey rows, and truth.
    let date_of = |day: usize| -> NaiveDate {
        let mut date = config.start_date;
        let mut remaining = day;
        while remaining > 0 {
            date = date.succ_opt().expect("date range");
            // Keep to weekdays: the survey was collected on workdays.
            remaining -= 1;
            while matches!(
                date.format("%u").to_string().as_str(),
                "6" | "7"
            ) {
                date = date.succ_opt().expect("date range");
            }
        }
        date
    };

    let mut rides = Vec::new();
    let mut truth = Vec::new();
    let mut survey_trips = Vec::new();
    let mut per_day_seq: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for trip in &trips {
        let date = date_of(trip.day);
        let seq = per_day_seq.entry(trip.day).or_insert(0);
        *seq += 1;
        let origin = &city.stations[trip.origin];
        let dest = &city.stations[trip.dest];

        if plan.kind == AgentKind::Survey {
            // Survey respondents report trips; they do not appear in the
            // card data.
            survey_trips.push(SurveyTrip {
                trip_seq: *seq,
                dep_time: trip.dep,
                arr_time: trip.arr,
                dep: origin.lonlat,
                arr: dest.lonlat,
                purpose: trip.purpose,
            });
            continue;
        }

        if trip.split_transfer {
            if let Some(mid_idx) = transfer_stop(city, trip.origin, trip.dest) {
                let mid = &city.stations[mid_idx];
                let total = (trip.arr - trip.dep) as f64;
                let leg1_end = trip.dep as f64 + total * 0.4;
                let gap = rng.gen_range(240.0..720.0);
                let leg2_start = (leg1_end + gap).min(trip.arr as f64 - 60.0);
                rides.push(RideRecord {
                    user_id: plan.id.clone(),
                    service_date: date,
                    route_id: format!("R{}-{}", origin.id, mid.id),
                    board_time: trip.dep,
                    alight_time: leg1_end as u32,
                    board_stop: origin.id.clone(),
                    alight_stop: mid.id.clone(),
                    board_lon: origin.lonlat.0,
                    board_lat: origin.lonlat.1,
                    alight_lon: mid.lonlat.0,
                    alight_lat: mid.lonlat.1,
                });
                rides.push(RideRecord {
                    user_id: plan.id.clone(),
                    service_date: date,
                    route_id: format!("R{}-{}", mid.id, dest.id),
                    board_time: leg2_start as u32,
                    alight_time: trip.arr,
                    board_stop: mid.id.clone(),
                    alight_stop: dest.id.clone(),
                    board_lon: mid.lonlat.0,
                    board_lat: mid.lonlat.1,
                    alight_lon: dest.lonlat.0,
                    alight_lat: dest.lonlat.1,
                });
            } else {
                // No third station available: fall through to a single ride.
                rides.push(single_ride(plan, date, trip, origin, dest));
            }
        } else {
            rides.push(single_ride(plan, date, trip, origin, dest));
        }

        truth.push(TruthRecord {
            user_id: plan.id.clone(),
            date,
            trip_seq: *seq,
            purpose: trip.purpose,
            age_band: plan.age,
            job_status: plan.job,
            income_band: plan.income,
        });
    }

    let survey = if plan.kind == AgentKind::Survey && !survey_trips.is_empty() {
        let work = if plan.survey_masked {
            None
        } else {
            plan.work_station.map(|w| city.stations[w].lonlat)
        };
        let home = city.stations[plan.home_station].lonlat;
        Some(SurveyRecord {
            person: SurveyPerson {
                person_id: plan.id.clone(),
                gender: plan.gender,
                age_band: plan.age,
                income_band: plan.income,
                job_status: plan.job,
                car_ownership: plan.car,
                home,
                work,
            },
            trips: survey_trips,
        })
    } else {
        None
    };

    AgentOutput { rides, survey, truth }
}

fn single_ride(
    plan: &AgentPlan,
    date: NaiveDate,
    trip: &PlannedTrip,
    origin: &Station,
    dest: &Station,
) -> RideRecord {
    RideRecord {
        user_id: plan.id.clone(),
        service_date: date,
        route_id: format!("R{}-{}", origin.id, dest.id),
        board_time: trip.dep,
        alight_time: trip.arr,
        board_stop: origin.id.clone(),
        alight_stop: dest.id.clone(),
        board_lon: origin.lonlat.0,
        board_lat: origin.lonlat.1,
        alight_lon: dest.lonlat.0,
        alight_lat: dest.lonlat.1,
    }
}

/// Generate the full synthetic dataset for a config. Same seed, same bytes.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let rates = derive_trip_rates(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);

    let city = build_city(config, &mut rng)?;
    let plans = build_plans(config, &city, rates, &mut rng);

    let outputs: Vec<AgentOutput> = plans
        .par_iter()
        .map(|plan| generate_agent(config, &city, &rates, plan))
        .collect();

    let mut rides = Vec::new();
    let mut survey = Vec::new();
    let mut truth = Vec::new();
    for out in outputs {
        rides.extend(out.rides);
        truth.extend(out.truth);
        if let Some(record) = out.survey {
            survey.push(record);
        }
    }
    rides.sort_by(|a, b| {
        (&a.user_id, a.service_date, a.board_time).cmp(&(&b.user_id, b.service_date, b.board_time))
    });
    survey.sort_by(|a, b| a.person.person_id.cmp(&b.person.person_id));
    truth.sort_by(|a, b| (&a.user_id, a.date, a.trip_seq).cmp(&(&b.user_id, b.date, b.trip_seq)));

    Ok(SynthData {
        rides,
        survey,
        poi: city.poi,
        population: city.population,
        land_price: city.land_price,
        grid_spec: city.spec,
        truth,
    })
}

fn write_raster_csv<W: std::io::Write>(writer: W, rows: &[RasterRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x_index", "y_index", "value"])?;
    for r in rows {
        w.write_record([
            r.x_index.to_string(),
            r.y_index.to_string(),
            format!("{:.3}", r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Truth CSV header.
pub const TRUTH_HEADER: [&str; 7] = [
    "user_id",
    "date",
    "trip_seq",
    "purpose",
    "age_band",
    "job_status",
    "income_band",
];

pub fn write_truth_csv<W: std::io::Write>(writer: W, truth: &[TruthRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRUTH_HEADER)?;
    for t in truth {
        w.write_record([
            t.user_id.as_str(),
            &t.date.format("%Y-%m-%d").to_string(),
            &t.trip_seq.to_string(),
            t.purpose.as_str(),
            t.age_band.as_str(),
            t.job_status.as_str(),
            t.income_band.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_truth<R: std::io::Read>(source: R) -> Result<Vec<TruthRecord>> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let idx: Vec<usize> = TRUTH_HEADER
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let get = |k: usize| -> Result<&str> {
            record
                .get(idx[k])
                .ok_or_else(|| Error::InvalidData(format!("truth row {}: short row", i + 1)))
                .map(str::trim)
        };
        records.push(TruthRecord {
            user_id: get(0)?.to_string(),
            date: NaiveDate::parse_from_str(get(1)?, "%Y-%m-%d")
                .map_err(|_| Error::InvalidData(format!("truth row {}: bad date", i + 1)))?,
            trip_seq: get(2)?
                .parse()
                .map_err(|_| Error::InvalidData(format!("truth row {}: bad trip_seq", i + 1)))?,
            purpose: Purpose::parse(get(3)?)?,
            age_band: AgeBand::parse(get(4)?)?,
            job_status: JobStatus::parse(get(5)?)?,
            income_band: IncomeBand::parse(get(6)?)?,
        });
    }
    Ok(records)
}

impl SynthData {
    /// Write all artifacts into a directory: rides.csv, survey.csv, poi.csv,
    /// grid_pop.csv, grid_lp.csv, truth.csv.
    pub fn write_to_dir(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let file = |name: &str| -> Result<std::fs::File> {
            Ok(std::fs::File::create(dir.join(name))?)
        };
        crate::ingest::write_rides_csv(file("rides.csv")?, &self.rides)?;
        crate::ingest::write_survey_csv(file("survey.csv")?, &self.survey)?;
        crate::ingest::write_poi_csv(file("poi.csv")?, &self.poi)?;
        write_raster_csv(file("grid_pop.csv")?, &self.population)?;
        write_raster_csv(file("grid_lp.csv")?, &self.land_price)?;
        write_truth_csv(file("truth.csv")?, &self.truth)?;
        Ok(())
    }
}

/// A predicted trip purpose keyed like the truth table.
#[derive(Debug, Clone, PartialEq)]
pub struct PurposePrediction {
    pub user_id: String,
    pub date: NaiveDate,
    pub trip_seq: usize,
    pub purpose: Purpose,
}

/// Predicted socio-economic attributes for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributePrediction {
    pub user_id: String,
    pub attrs: SocioAttributes,
}

/// Score purpose predictions against the hidden truth. Every prediction must
/// match a truth row by (user, date, trip_seq); unknown ids are an error.
pub fn score_purposes(
    truth: &[TruthRecord],
    predictions: &[PurposePrediction],
) -> Result<ClassificationReport> {
    if predictions.is_empty() {
        return Err(Error::Degenerate("no predictions to score".into()));
    }
    let by_key: std::collections::BTreeMap<(&str, NaiveDate, usize), Purpose> = truth
        .iter()
        .map(|t| ((t.user_id.as_str(), t.date, t.trip_seq), t.purpose))
        .collect();
    let mut y_true = Vec::with_capacity(predictions.len());
    let mut y_pred = Vec::with_capacity(predictions.len());
    for p in predictions {
        let key = (p.user_id.as_str(), p.date, p.trip_seq);
        let actual = by_key.get(&key).ok_or_else(|| {
            Error::InvalidData(format!(
                "prediction for unknown trip ({}, {}, {})",
                p.user_id, p.date, p.trip_seq
            ))
        })?;
        y_true.push(actual.index());
        y_pred.push(p.purpose.index());
    }
    let names: Vec<String> = Purpose::ALL.iter().map(|p| p.as_str().to_string()).collect();
    classification_report(&y_true, &y_pred, &names)
}

/// Per-attribute reports (age, job, income) for voted user profiles.
pub fn score_attributes(
    truth: &[TruthRecord],
    predictions: &[AttributePrediction],
) -> Result<[ClassificationReport; 3]> {
    if predictions.is_empty() {
        return Err(Error::Degenerate("no predictions to score".into()));
    }
    let by_user: std::collections::BTreeMap<&str, (AgeBand, JobStatus, IncomeBand)> = truth
        .iter()
        .map(|t| (t.user_id.as_str(), (t.age_band, t.job_status, t.income_band)))
        .collect();
    let mut age = (Vec::new(), Vec::new());
    let mut job = (Vec::new(), Vec::new());
    let mut income = (Vec::new(), Vec::new());
    for p in predictions {
        let actual = by_user.get(p.user_id.as_str()).ok_or_else(|| {
            Error::InvalidData(format!("prediction for unknown user {}", p.user_id))
        })?;
        age.0.push(actual.0.index());
        age.1.push(p.attrs.age_band.index());
        job.0.push(actual.1.index());
        job.1.push(p.attrs.job_status.index());
        income.0.push(actual.2.index());
        income.1.push(p.attrs.income_band.index());
    }
    let age_names: Vec<String> = AgeBand::ALL.iter().map(|b| b.as_str().to_string()).collect();
    let job_names: Vec<String> = JobStatus::ALL.iter().map(|b| b.as_str().to_string()).collect();
    let income_names: Vec<String> =
        IncomeBand::ALL.iter().map(|b| b.as_str().to_string()).collect();
    Ok([
        classification_report(&age.0, &age.1, &age_names)?,
        classification_report(&job.0, &job.1, &job_names)?,
        classification_report(&income.0, &income.1, &income_names)?,
    ])
}
