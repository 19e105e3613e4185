//! Seeded Monte Carlo campaigns.
//!
//! Each frame draws reported user positions, runs every configured allocator
//! arm on them, then draws true positions and Rayleigh fading and scores the
//! realized rates. All arms of a frame share the same draws, and every random
//! stream is keyed by `(seed, user count, frame, purpose, sector)`, so results
//! do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::allocator::{allocate, Allocation, AllocatorError, Policy, System};
use crate::channel::{true_sinr, FadingRealization};
use crate::geometry::{sample_actual_position, Position};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Allocator(#[from] AllocatorError),
    #[error("invalid campaign: {0}")]
    Invalid(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Which allocator an arm runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme<T> {
    /// Adaptive beamwidth with edge-user protection.
    Proposed,
    /// Adaptive beamwidth, every served user treated as a center user.
    NoProtect,
    /// Edge protection with a single beamwidth (radians).
    Fixed(T),
}

/// One algorithm configuration compared within a campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm<T> {
    pub scheme: Scheme<T>,
    /// Edge threshold δ in meters (ignored by [`Scheme::NoProtect`]).
    pub delta: T,
}

impl<T: Real> Arm<T> {
    pub fn new(scheme: Scheme<T>, delta: T) -> Self {
        Self { scheme, delta }
    }

    /// `proposed`, `no-protect` or `fixed:<deg>`.
    pub fn label(&self) -> String {
        match self.scheme {
            Scheme::Proposed => "proposed".to_string(),
            Scheme::NoProtect => "no-protect".to_string(),
            Scheme::Fixed(theta) => format!("fixed:{}", crate::scalar::clean_degrees(theta)),
        }
    }

    pub fn policy(
        &self,
        beamwidths: &[T],
        num_sectors: usize,
    ) -> Result<Policy<T>, AllocatorError> {
        match self.scheme {
            Scheme::Proposed => Policy::proposed(beamwidths, self.delta, num_sectors),
            Scheme::NoProtect => Policy::no_protect(beamwidths, num_sectors),
            Scheme::Fixed(theta) => Policy::fixed(theta, self.delta, num_sectors),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig<T> {
    pub system: System<T>,
    /// Candidate beamwidths in radians.
    pub beamwidths: Vec<T>,
    /// Position uncertainty radius β in meters.
    pub beta: T,
    pub arms: Vec<Arm<T>>,
    /// User counts K to sweep.
    pub user_counts: Vec<usize>,
    pub frames: usize,
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
}

impl<T: Real> CampaignConfig<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        self.system.validate()?;
        if self.frames == 0 {
            return Err(SimError::Invalid("frames must be at least 1".into()));
        }
        if self.user_counts.is_empty() {
            return Err(SimError::Invalid("no user counts to sweep".into()));
        }
        if self.arms.is_empty() {
            return Err(SimError::Invalid("no algorithm arms".into()));
        }
        if !(self.beta >= T::zero()) || !self.beta.is_finite() {
            return Err(SimError::Invalid(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        for arm in &self.arms {
            if arm.scheme != Scheme::NoProtect && arm.delta > self.beta {
                return Err(SimError::Invalid(format!(
                    "delta {} exceeds beta {} for arm {}",
                    arm.delta,
                    self.beta,
                    arm.label()
                )));
            }
        }
        self.policies()?;
        Ok(())
    }

    pub fn policies(&self) -> Result<Vec<Policy<T>>, AllocatorError> {
        self.arms
            .iter()
            .map(|a| a.policy(&self.beamwidths, self.system.num_sectors()))
            .collect()
    }
}

/// Purpose tag of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Stream {
    Reported = 1,
    Actual = 2,
    Fading = 3,
    TieBreak = 4,
}

/// Counter-keyed generator for one `(seed, users, frame, purpose, sector)` tuple.
pub fn stream_rng(
    seed: u64,
    users: usize,
    frame: usize,
    stream: Stream,
    sector: usize,
) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(users as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(frame as u64).to_le_bytes());
    key[24..28].copy_from_slice(&(stream as u32).to_le_bytes());
    key[28..32].copy_from_slice(&(sector as u32).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Random draws shared by every arm in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSnapshot<T> {
    pub reported: Vec<Position<T>>,
    pub actual: Vec<Position<T>>,
    pub fading: FadingRealization<T>,
}

impl<T: Real> FrameSnapshot<T> {
    pub fn draw(system: &System<T>, beta: T, users: usize, seed: u64, frame: usize) -> Self {
        let cell = &system.cell;
        let mut rng = stream_rng(seed, users, frame, Stream::Reported, 0);
        let reported: Vec<_> = (0..users).map(|_| cell.sample_uniform(&mut rng)).collect();
        let mut rng = stream_rng(seed, users, frame, Stream::Actual, 0);
        let actual = reported
            .iter()
            .map(|p| sample_actual_position(p, beta, cell, &mut rng))
            .collect();
        let mut rng = stream_rng(seed, users, frame, Stream::Fading, 0);
        let fading =
            FadingRealization::sample(&mut rng, users, system.num_sectors(), system.num_subbands());
        Self {
            reported,
            actual,
            fading,
        }
    }
}

/// Realized outcome of one arm in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics<T> {
    pub users: usize,
    /// Sum of log realized rates over users with positive rate.
    pub gamma: Option<T>,
    pub sum_rate_bps: T,
    pub predicted_sum_rate_bps: T,
    /// Scheduled with positive realized rate.
    pub served: usize,
    /// Scheduled but realized nothing (true position outside every serving beam).
    pub outage: usize,
    /// Not scheduled at all.
    pub excluded: usize,
    /// Served users whose realized rate reached their class target.
    pub qos_satisfied: usize,
    /// Committed beamwidth per sector.
    pub beamwidths: Vec<Option<T>>,
    /// Realized rate per user.
    pub rates: Vec<T>,
}

impl<T: Real> FrameMetrics<T> {
    pub fn scheduled(&self) -> usize {
        self.served + self.outage
    }
}

/// Scores an allocation against the true positions and fading of `snapshot`.
pub fn evaluate<T: Real>(
    system: &System<T>,
    allocation: &Allocation<T>,
    snapshot: &FrameSnapshot<T>,
) -> Result<FrameMetrics<T>, SimError> {
    let users = snapshot.reported.len();
    let grids: Vec<_> = (0..system.num_sectors())
        .map(|m| allocation.grid(m))
        .collect();
    let mut rates = vec![T::zero(); users];
    let mut targets = vec![T::zero(); users];
    let mut predicted = T::zero();
    for d in allocation.sectors.iter().flatten() {
        let grid = grids[d.sector].as_ref().expect("decided sector has a grid");
        for g in &d.grants {
            predicted = predicted + g.predicted_rate;
            targets[g.user] = targets[g.user].max(system.qos.target(g.class));
            let actual = &snapshot.actual[g.user];
            if !grid.in_coverage(actual, d.beam, &system.cell) {
                continue;
            }
            for &n in &g.subbands {
                let sinr = true_sinr(
                    &system.budget,
                    d.beamwidth,
                    actual.distance(),
                    snapshot.fading.power_gain(g.user, d.sector, n),
                    allocation.matrix.interferers(g.user, d.sector, n),
                )
                .map_err(AllocatorError::from)?;
                rates[g.user] = rates[g.user] + system.budget.subband_rate(sinr);
            }
        }
    }

    let (mut served, mut outage, mut qos_satisfied) = (0, 0, 0);
    for k in 0..users {
        if !allocation.matrix.is_scheduled(k) {
            continue;
        }
        if rates[k] > T::zero() {
            served += 1;
            if rates[k] >= targets[k] {
                qos_satisfied += 1;
            }
        } else {
            outage += 1;
        }
    }
    Ok(FrameMetrics {
        users,
        gamma: crate::allocator::fairness(rates.iter().copied()),
        sum_rate_bps: rates.iter().copied().fold(T::zero(), |a, b| a + b),
        predicted_sum_rate_bps: predicted,
        served,
        outage,
        excluded: users - served - outage,
        qos_satisfied,
        beamwidths: allocation
            .sectors
            .iter()
            .map(|d| d.as_ref().map(|d| d.beamwidth))
            .collect(),
        rates,
    })
}

/// Allocation of one arm on one frame, using the frame's tie-break streams.
pub fn allocate_frame<T: Real>(
    system: &System<T>,
    policy: &Policy<T>,
    snapshot: &FrameSnapshot<T>,
    seed: u64,
    frame: usize,
) -> Result<Allocation<T>, SimError> {
    let users = snapshot.reported.len();
    Ok(allocate(&snapshot.reported, system, policy, |m| {
        stream_rng(seed, users, frame, Stream::TieBreak, m)
    })?)
}

/// Draws frame `frame` for `users` users and evaluates arm `arm` on it.
pub fn run_frame<T: Real>(
    config: &CampaignConfig<T>,
    arm: usize,
    users: usize,
    frame: usize,
) -> Result<FrameMetrics<T>, SimError> {
    let policy = config.arms[arm].policy(&config.beamwidths, config.system.num_sectors())?;
    let snapshot = FrameSnapshot::draw(&config.system, config.beta, users, config.seed, frame);
    let alloc = allocate_frame(&config.system, &policy, &snapshot, config.seed, frame)?;
    evaluate(&config.system, &alloc, &snapshot)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStat<T> {
    pub mean: Option<T>,
    pub stderr: Option<T>,
    pub count: usize,
}

impl<T: Real> MeanStat<T> {
    pub fn from_samples<I: IntoIterator<Item = T>>(samples: I) -> Self {
        let v: Vec<T> = samples.into_iter().collect();
        let count = v.len();
        if count == 0 {
            return Self {
                mean: None,
                stderr: None,
                count,
            };
        }
        let n = T::from_usize_lossy(count);
        let mean = v.iter().copied().fold(T::zero(), |a, b| a + b) / n;
        let stderr = (count > 1).then(|| {
            let ss = v
                .iter()
                .map(|&x| (x - mean) * (x - mean))
                .fold(T::zero(), |a, b| a + b);
            (ss / (n - T::one())).sqrt() / n.sqrt()
        });
        Self {
            mean: Some(mean),
            stderr,
            count,
        }
    }
}

/// Aggregate of one arm at one user count.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary<T> {
    pub users: usize,
    pub arm: Arm<T>,
    pub frames: usize,
    /// Over frames where at least one user realized a positive rate.
    pub gamma: MeanStat<T>,
    pub sum_rate_bps: MeanStat<T>,
    pub mean_served: T,
    pub mean_outage: T,
    pub mean_excluded: T,
    /// Mean of outage / scheduled over frames with anyone scheduled.
    pub mean_outage_fraction: Option<T>,
    /// QoS-satisfied users over served users, pooled over frames.
    pub qos_fraction: Option<T>,
    /// `(beamwidth, times committed)` over all frames and sectors, ascending beamwidth.
    pub beamwidth_counts: Vec<(T, u64)>,
}

impl<T: Real> ArmSummary<T> {
    pub fn from_frames(
        users: usize,
        arm: Arm<T>,
        policy: &Policy<T>,
        frames: &[FrameMetrics<T>],
    ) -> Self {
        let n = T::from_usize_lossy(frames.len().max(1));
        let mean_of = |f: &dyn Fn(&FrameMetrics<T>) -> usize| {
            frames
                .iter()
                .map(|m| T::from_usize_lossy(f(m)))
                .fold(T::zero(), |a, b| a + b)
                / n
        };
        let fractions: Vec<T> = frames
            .iter()
            .filter(|m| m.scheduled() > 0)
            .map(|m| T::from_usize_lossy(m.outage) / T::from_usize_lossy(m.scheduled()))
            .collect();
        let served_total: usize = frames.iter().map(|m| m.served).sum();
        let qos_total: usize = frames.iter().map(|m| m.qos_satisfied).sum();
        let mut beamwidth_counts: Vec<(T, u64)> = policy.beamwidths().map(|t| (t, 0)).collect();
        for theta in frames.iter().flat_map(|m| m.beamwidths.iter().flatten()) {
            if let Some(slot) = beamwidth_counts.iter_mut().find(|(t, _)| t == theta) {
                slot.1 += 1;
            }
        }
        Self {
            users,
            arm,
            frames: frames.len(),
            gamma: MeanStat::from_samples(frames.iter().filter_map(|m| m.gamma)),
            sum_rate_bps: MeanStat::from_samples(frames.iter().map(|m| m.sum_rate_bps)),
            mean_served: mean_of(&|m| m.served),
            mean_outage: mean_of(&|m| m.outage),
            mean_excluded: mean_of(&|m| m.excluded),
            mean_outage_fraction: MeanStat::from_samples(fractions).mean,
            qos_fraction: (served_total > 0)
                .then(|| T::from_usize_lossy(qos_total) / T::from_usize_lossy(served_total)),
            beamwidth_counts,
        }
    }

    /// Share of decided sectors that committed each beamwidth.
    pub fn beamwidth_fractions(&self) -> Vec<(T, T)> {
        let total: u64 = self.beamwidth_counts.iter().map(|(_, c)| c).sum();
        self.beamwidth_counts
            .iter()
            .map(|&(t, c)| {
                let f = if total == 0 {
                    T::zero()
                } else {
                    T::lit(c as f64) / T::lit(total as f64)
                };
                (t, f)
            })
            .collect()
    }

    /// Most frequently committed beamwidth; ties go to the narrower one.
    pub fn modal_beamwidth(&self) -> Option<T> {
        let mut best: Option<(T, u64)> = None;
        for &(t, c) in &self.beamwidth_counts {
            if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((t, c));
            }
        }
        best.map(|(t, _)| t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics<T> {
    /// Ordered by user count, then by arm as configured.
    pub summaries: Vec<ArmSummary<T>>,
}

impl<T: Real> AggregateMetrics<T> {
    pub fn get(&self, users: usize, arm: usize) -> Option<&ArmSummary<T>> {
        let arms = self
            .summaries
            .iter()
            .filter(|s| s.users == users)
            .collect::<Vec<_>>();
        arms.get(arm).copied()
    }
}

/// Per-frame metrics of every arm: `result[frame][arm]`.
pub fn run_frames<T: Real>(
    config: &CampaignConfig<T>,
    policies: &[Policy<T>],
    users: usize,
) -> Result<Vec<Vec<FrameMetrics<T>>>, SimError> {
    (0..config.frames)
        .into_par_iter()
        .map(|frame| {
            let snapshot =
                FrameSnapshot::draw(&config.system, config.beta, users, config.seed, frame);
            policies
                .iter()
                .map(|p| {
                    let alloc = allocate_frame(&config.system, p, &snapshot, config.seed, frame)?;
                    evaluate(&config.system, &alloc, &snapshot)
                })
                .collect()
        })
        .collect()
}

/// Runs every arm at every user count and aggregates.
pub fn run_campaign<T: Real>(config: &CampaignConfig<T>) -> Result<AggregateMetrics<T>, SimError> {
    config.validate()?;
    let policies = config.policies()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| SimError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        let mut summaries = Vec::new();
        for &users in &config.user_counts {
            let frames = run_frames(config, &policies, users)?;
            for (a, (arm, policy)) in config.arms.iter().zip(&policies).enumerate() {
                let per_arm: Vec<FrameMetrics<T>> = frames.iter().map(|f| f[a].clone()).collect();
                summaries.push(ArmSummary::from_frames(users, *arm, policy, &per_arm));
            }
        }
        Ok(AggregateMetrics { summaries })
    })
}
