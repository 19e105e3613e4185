//! Joint beam/subband allocation with adaptive beamwidth.
//!
//! For every sector independently, and for every candidate beamwidth, the
//! allocator:
//!
//! 1. picks the beam of the sector holding the most reported positions
//!    (uniform random tie-break),
//! 2. gathers users reported in that beam and in its two neighbours (which may
//!    belong to the neighbouring sectors),
//! 3. splits them into center and edge users by their distance to the beam's
//!    boundary rays against the threshold `δ`,
//! 4. sizes each user's subband demand from its position-only SINR and its
//!    class rate target,
//! 5. grants whole demands in order of increasing distance from the base
//!    station, skipping users whose demand no longer fits,
//! 6. scores the outcome by the sum of log predicted rates.
//!
//! The beamwidth with the best score is committed for that sector (ties go
//! to the narrower beam).

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::channel::{estimated_sinr, ChannelError, LinkBudget};
use crate::geometry::{BeamGrid, BeamId, CellConfig, GeometryError, Position};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("QoS targets must satisfy center > edge > 0 (got {center} / {edge} bit/s)")]
    Qos { center: f64, edge: f64 },
    #[error("no candidate beamwidths")]
    NoCandidates,
    #[error("edge threshold must be finite and nonnegative, got {0} m")]
    Threshold(f64),
    #[error("block (sector {sector}, subband {subband}) already granted to user {owner}")]
    BlockTaken {
        sector: usize,
        subband: usize,
        owner: usize,
    },
}

/// Minimum rate targets of center and edge users, in bit/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosConfig<T> {
    pub rmin_center_bps: T,
    pub rmin_edge_bps: T,
}

impl<T: Real> Default for QosConfig<T> {
    fn default() -> Self {
        Self {
            rmin_center_bps: T::lit(2e9),
            rmin_edge_bps: T::lit(1e9),
        }
    }
}

impl<T: Real> QosConfig<T> {
    pub fn validate(&self) -> Result<(), AllocatorError> {
        let ok = self.rmin_edge_bps > T::zero()
            && self.rmin_center_bps > self.rmin_edge_bps
            && self.rmin_center_bps.is_finite();
        if ok {
            Ok(())
        } else {
            Err(AllocatorError::Qos {
                center: self.rmin_center_bps.as_f64(),
                edge: self.rmin_edge_bps.as_f64(),
            })
        }
    }

    pub fn target(&self, class: UserClass) -> T {
        match class {
            UserClass::Center => self.rmin_center_bps,
            UserClass::Edge => self.rmin_edge_bps,
        }
    }
}

/// Static description of the cell the allocator works on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct System<T> {
    pub cell: CellConfig<T>,
    pub budget: LinkBudget<T>,
    pub qos: QosConfig<T>,
}

impl<T: Real> Default for System<T> {
    fn default() -> Self {
        Self {
            cell: CellConfig::default(),
            budget: LinkBudget::default(),
            qos: QosConfig::default(),
        }
    }
}

impl<T: Real> System<T> {
    pub fn validate(&self) -> Result<(), AllocatorError> {
        CellConfig::new(self.cell.radius_m, self.cell.num_sectors)?;
        self.budget.validate()?;
        self.qos.validate()
    }

    pub fn num_sectors(&self) -> usize {
        self.cell.num_sectors
    }

    pub fn num_subbands(&self) -> usize {
        self.budget.num_subbands
    }
}

/// How an allocator treats users near the beam edge and which beamwidths it may pick.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    grids: Vec<BeamGrid<T>>,
    delta: T,
    protect_edges: bool,
}

impl<T: Real> Policy<T> {
    /// Adaptive beamwidth over `beamwidths` (radians) with edge threshold `delta` (meters).
    pub fn proposed(
        beamwidths: &[T],
        delta: T,
        num_sectors: usize,
    ) -> Result<Self, AllocatorError> {
        Self::build(beamwidths, delta, true, num_sectors)
    }

    /// Adaptive beamwidth, but every user in the selected beam is a center user
    /// and neighbouring-beam users are never served.
    pub fn no_protect(beamwidths: &[T], num_sectors: usize) -> Result<Self, AllocatorError> {
        Self::build(beamwidths, T::zero(), false, num_sectors)
    }

    /// Single beamwidth, edge protection with threshold `delta`.
    pub fn fixed(beamwidth: T, delta: T, num_sectors: usize) -> Result<Self, AllocatorError> {
        Self::build(&[beamwidth], delta, true, num_sectors)
    }

    fn build(
        beamwidths: &[T],
        delta: T,
        protect_edges: bool,
        num_sectors: usize,
    ) -> Result<Self, AllocatorError> {
        if beamwidths.is_empty() {
            return Err(AllocatorError::NoCandidates);
        }
        if !(delta >= T::zero()) || !delta.is_finite() {
            return Err(AllocatorError::Threshold(delta.as_f64()));
        }
        let mut grids = beamwidths
            .iter()
            .map(|&theta| BeamGrid::new(theta, num_sectors))
            .collect::<Result<Vec<_>, _>>()?;
        grids.sort_by(|a, b| a.beamwidth().partial_cmp(&b.beamwidth()).unwrap());
        grids.dedup_by(|a, b| a.per_sector() == b.per_sector());
        Ok(Self {
            grids,
            delta,
            protect_edges,
        })
    }

    /// Candidate beamwidths in ascending order.
    pub fn beamwidths(&self) -> impl Iterator<Item = T> + '_ {
        self.grids.iter().map(|g| g.beamwidth())
    }

    pub fn grids(&self) -> &[BeamGrid<T>] {
        &self.grids
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn protects_edges(&self) -> bool {
        self.protect_edges
    }

    pub fn num_sectors(&self) -> usize {
        self.grids[0].num_sectors()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UserClass {
    Center,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifiedUser<T> {
    pub user: usize,
    /// Distance to the nearer boundary ray of the selected beam.
    pub edge_distance: T,
    /// Reported position lies in the selected beam (as opposed to a neighbour).
    pub in_beam: bool,
    /// `None` when the user is not served by this beam.
    pub class: Option<UserClass>,
}

/// Center/edge split of the users around one selected beam.
#[derive(Debug, Clone, PartialEq)]
pub struct UserClassification<T> {
    pub delta: T,
    pub users: Vec<ClassifiedUser<T>>,
}

impl<T: Real> UserClassification<T> {
    pub fn center(&self) -> impl Iterator<Item = &ClassifiedUser<T>> {
        self.users
            .iter()
            .filter(|u| u.class == Some(UserClass::Center))
    }

    pub fn edge(&self) -> impl Iterator<Item = &ClassifiedUser<T>> {
        self.users
            .iter()
            .filter(|u| u.class == Some(UserClass::Edge))
    }

    pub fn excluded(&self) -> impl Iterator<Item = &ClassifiedUser<T>> {
        self.users.iter().filter(|u| u.class.is_none())
    }
}

/// Beam of `sector` containing the most reported positions; `None` if the sector is empty.
pub fn select_beam<T: Real, R: Rng + ?Sized>(
    positions: &[Position<T>],
    grid: &BeamGrid<T>,
    sector: usize,
    rng: &mut R,
) -> Option<BeamId> {
    let mut counts = vec![0usize; grid.per_sector()];
    for pos in positions {
        let b = grid.beam_of(pos);
        if b.sector == sector {
            counts[b.slot] += 1;
        }
    }
    let best = *counts.iter().max()?;
    if best == 0 {
        return None;
    }
    let tied: Vec<usize> = (0..counts.len()).filter(|&v| counts[v] == best).collect();
    let slot = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    };
    Some(BeamId::new(sector, slot))
}

/// Classifies every user reported in `selected` or its two neighbours.
///
/// In-beam users are center users when strictly farther than `delta` from the
/// beam edge and edge users otherwise. Neighbour-beam users are edge users when
/// within `delta` of the selected beam and unserved otherwise. Without edge
/// protection every in-beam user is a center user and neighbours are unserved.
pub fn classify_users<T: Real>(
    positions: &[Position<T>],
    grid: &BeamGrid<T>,
    selected: BeamId,
    delta: T,
    protect_edges: bool,
) -> UserClassification<T> {
    let (prev, next) = grid.adjacent(selected);
    let users = positions
        .iter()
        .enumerate()
        .filter_map(|(user, pos)| {
            let b = grid.beam_of(pos);
            let in_beam = b == selected;
            if !in_beam && b != prev && b != next {
                return None;
            }
            let edge_distance = grid.edge_distance(pos, selected);
            let class = match (in_beam, protect_edges) {
                (true, false) => Some(UserClass::Center),
                (true, true) if edge_distance > delta => Some(UserClass::Center),
                (true, true) => Some(UserClass::Edge),
                (false, true) if edge_distance <= delta => Some(UserClass::Edge),
                (false, _) => None,
            };
            Some(ClassifiedUser {
                user,
                edge_distance,
                in_beam,
                class,
            })
        })
        .collect();
    UserClassification { delta, users }
}

/// Subbands needed to reach `rate_target` at position-only SINR `gamma_prime`.
///
/// `None` when a subband carries no rate at all.
pub fn required_subbands<T: Real>(gamma_prime: T, rate_target: T, w_hz: T) -> Option<usize> {
    let per_subband = w_hz * gamma_prime.ln_1p() / T::LN_2();
    if !(per_subband > T::zero()) || !per_subband.is_finite() {
        return None;
    }
    (rate_target / per_subband).ceil().to_usize()
}

/// Grants whole demands in the given order from a pool of `num_subbands`.
///
/// A demand that no longer fits is skipped and later entries are still tried.
/// Subbands are handed out lowest index first. Returns `(entry index, subbands)`.
pub fn allocate_sector(demands: &[Option<usize>], num_subbands: usize) -> Vec<(usize, Vec<usize>)> {
    let mut next_free = 0;
    let mut grants = Vec::new();
    for (i, demand) in demands.iter().enumerate() {
        if next_free == num_subbands {
            break;
        }
        match *demand {
            Some(n) if n > 0 && n <= num_subbands - next_free => {
                grants.push((i, (next_free..next_free + n).collect()));
                next_free += n;
            }
            _ => {}
        }
    }
    grants
}

/// Sum of natural logs over strictly positive rates; `None` if there are none.
pub fn fairness<T: Real, I: IntoIterator<Item = T>>(rates: I) -> Option<T> {
    let mut any = false;
    let mut total = T::zero();
    for r in rates {
        if r > T::zero() {
            any = true;
            total = total + r.ln();
        }
    }
    any.then_some(total)
}

/// Subbands granted to one user by one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct Grant<T> {
    pub user: usize,
    pub class: UserClass,
    pub subbands: Vec<usize>,
    /// Position-only SINR used to size the grant.
    pub gamma_prime: T,
    /// `subbands.len()` times the position-only subband rate.
    pub predicted_rate: T,
}

/// What one candidate beamwidth would do in one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateOutcome<T> {
    pub beamwidth: T,
    pub beam: Option<BeamId>,
    pub classification: Option<UserClassification<T>>,
    pub grants: Vec<Grant<T>>,
    /// Sum of log predicted rates; `None` if nobody is granted.
    pub gamma: Option<T>,
}

/// Every candidate evaluated in one sector and the index of the one committed.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorOutcome<T> {
    pub sector: usize,
    pub candidates: Vec<CandidateOutcome<T>>,
    pub chosen: Option<usize>,
}

impl<T: Real> SectorOutcome<T> {
    pub fn decision(&self) -> Option<&CandidateOutcome<T>> {
        self.chosen.map(|i| &self.candidates[i])
    }
}

/// Runs the per-beamwidth pipeline for one sector and one grid.
pub fn evaluate_candidate<T: Real, R: Rng + ?Sized>(
    positions: &[Position<T>],
    system: &System<T>,
    policy: &Policy<T>,
    grid: &BeamGrid<T>,
    sector: usize,
    rng: &mut R,
) -> Result<CandidateOutcome<T>, AllocatorError> {
    let beamwidth = grid.beamwidth();
    let Some(beam) = select_beam(positions, grid, sector, rng) else {
        return Ok(CandidateOutcome {
            beamwidth,
            beam: None,
            classification: None,
            grants: Vec::new(),
            gamma: None,
        });
    };
    let classification = classify_users(positions, grid, beam, policy.delta, policy.protect_edges);

    struct Candidate<T> {
        user: usize,
        class: UserClass,
        distance: T,
        gamma_prime: T,
        demand: Option<usize>,
    }
    let w = system.budget.subband_bandwidth_hz();
    let mut queue = Vec::new();
    for cu in &classification.users {
        let Some(class) = cu.class else { continue };
        let distance = positions[cu.user].distance();
        let gamma_prime =
            estimated_sinr(&system.budget, system.num_sectors(), beamwidth, distance)?;
        let demand = required_subbands(gamma_prime, system.qos.target(class), w);
        queue.push(Candidate {
            user: cu.user,
            class,
            distance,
            gamma_prime,
            demand,
        });
    }
    queue.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap_or(Ordering::Equal)
            .then(a.user.cmp(&b.user))
    });

    let demands: Vec<Option<usize>> = queue.iter().map(|c| c.demand).collect();
    let grants: Vec<Grant<T>> = allocate_sector(&demands, system.num_subbands())
        .into_iter()
        .map(|(i, subbands)| {
            let c = &queue[i];
            let predicted_rate =
                T::from_usize_lossy(subbands.len()) * system.budget.subband_rate(c.gamma_prime);
            Grant {
                user: c.user,
                class: c.class,
                subbands,
                gamma_prime: c.gamma_prime,
                predicted_rate,
            }
        })
        .collect();
    let gamma = fairness(grants.iter().map(|g| g.predicted_rate));
    Ok(CandidateOutcome {
        beamwidth,
        beam: Some(beam),
        classification: Some(classification),
        grants,
        gamma,
    })
}

/// Evaluates every candidate beamwidth for one sector and picks the best score.
pub fn optimize_sector<T: Real, R: Rng + ?Sized>(
    positions: &[Position<T>],
    system: &System<T>,
    policy: &Policy<T>,
    sector: usize,
    rng: &mut R,
) -> Result<SectorOutcome<T>, AllocatorError> {
    let candidates = policy
        .grids
        .iter()
        .map(|grid| evaluate_candidate(positions, system, policy, grid, sector, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let mut chosen: Option<(usize, T)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if let Some(g) = c.gamma {
            if chosen.is_none_or(|(_, best)| g > best) {
                chosen = Some((i, g));
            }
        }
    }
    Ok(SectorOutcome {
        sector,
        candidates,
        chosen: chosen.map(|(i, _)| i),
    })
}

/// Binary indicator `φ[k, m, n]`: user `k` holds subband `n` on sector `m`'s beam.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationMatrix {
    users: usize,
    sectors: usize,
    subbands: usize,
    phi: Vec<bool>,
}

impl AllocationMatrix {
    pub fn new(users: usize, sectors: usize, subbands: usize) -> Self {
        Self {
            users,
            sectors,
            subbands,
            phi: vec![false; users * sectors * subbands],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.users, self.sectors, self.subbands)
    }

    fn idx(&self, user: usize, sector: usize, subband: usize) -> usize {
        assert!(user < self.users && sector < self.sectors && subband < self.subbands);
        (user * self.sectors + sector) * self.subbands + subband
    }

    pub fn get(&self, user: usize, sector: usize, subband: usize) -> bool {
        self.phi[self.idx(user, sector, subband)]
    }

    /// Raw write, bypassing the one-user-per-block check.
    pub fn set(&mut self, user: usize, sector: usize, subband: usize, value: bool) {
        let i = self.idx(user, sector, subband);
        self.phi[i] = value;
    }

    /// Marks the block for `user`, refusing if another user already holds it.
    pub fn grant(
        &mut self,
        user: usize,
        sector: usize,
        subband: usize,
    ) -> Result<(), AllocatorError> {
        if let Some(owner) = self.owner(sector, subband) {
            if owner != user {
                return Err(AllocatorError::BlockTaken {
                    sector,
                    subband,
                    owner,
                });
            }
        }
        self.set(user, sector, subband, true);
        Ok(())
    }

    /// First user holding block `(sector, subband)`.
    pub fn owner(&self, sector: usize, subband: usize) -> Option<usize> {
        (0..self.users).find(|&k| self.get(k, sector, subband))
    }

    /// Blocks `(sector, subband)` held by `user`.
    pub fn blocks_of(&self, user: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.sectors)
            .flat_map(move |m| (0..self.subbands).map(move |n| (m, n)))
            .filter(move |&(m, n)| self.get(user, m, n))
    }

    /// Number of blocks on subband `n` in sectors other than `sector` held by users other than `user`.
    pub fn interferers(&self, user: usize, sector: usize, subband: usize) -> usize {
        (0..self.sectors)
            .filter(|&j| j != sector)
            .map(|j| {
                (0..self.users)
                    .filter(|&i| i != user && self.get(i, j, subband))
                    .count()
            })
            .sum()
    }

    pub fn is_scheduled(&self, user: usize) -> bool {
        self.blocks_of(user).next().is_some()
    }
}

/// Structural constraint broken by an allocation matrix.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintViolation {
    #[error("sector {sector} subband {subband} shared by {count} users")]
    SharedBlock {
        sector: usize,
        subband: usize,
        count: usize,
    },
    #[error("subband {subband} carries {count} beams, more than the {sectors} sectors")]
    TooManyBeams {
        subband: usize,
        count: usize,
        sectors: usize,
    },
}

/// Walks the full tensor and checks one user per (sector, subband) and at most `M` beams per subband.
pub fn check_constraints(phi: &AllocationMatrix) -> Result<(), ConstraintViolation> {
    let (users, sectors, subbands) = phi.dims();
    for n in 0..subbands {
        let mut per_subband = 0;
        for m in 0..sectors {
            let count = (0..users).filter(|&k| phi.get(k, m, n)).count();
            if count > 1 {
                return Err(ConstraintViolation::SharedBlock {
                    sector: m,
                    subband: n,
                    count,
                });
            }
            per_subband += count;
        }
        if per_subband > sectors {
            return Err(ConstraintViolation::TooManyBeams {
                subband: n,
                count: per_subband,
                sectors,
            });
        }
    }
    Ok(())
}

/// Committed beam and grants for one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDecision<T> {
    pub sector: usize,
    pub beam: BeamId,
    pub beamwidth: T,
    pub predicted_gamma: T,
    pub grants: Vec<Grant<T>>,
}

/// Outcome of one allocation round over the whole cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<T> {
    pub matrix: AllocationMatrix,
    /// One entry per sector; `None` when the sector serves nobody.
    pub sectors: Vec<Option<SectorDecision<T>>>,
}

impl<T: Real> Allocation<T> {
    /// Grid of the beam committed in `sector`.
    pub fn grid(&self, sector: usize) -> Option<BeamGrid<T>> {
        let d = self.sectors[sector].as_ref()?;
        Some(BeamGrid::new(d.beamwidth, self.sectors.len()).expect("committed beamwidth is valid"))
    }
}

/// Allocates beams and subbands for one frame of reported positions.
///
/// `sector_rng(m)` supplies the tie-break stream of sector `m`.
pub fn allocate<T, R, F>(
    positions: &[Position<T>],
    system: &System<T>,
    policy: &Policy<T>,
    mut sector_rng: F,
) -> Result<Allocation<T>, AllocatorError>
where
    T: Real,
    R: Rng,
    F: FnMut(usize) -> R,
{
    let sectors = system.num_sectors();
    let mut matrix = AllocationMatrix::new(positions.len(), sectors, system.num_subbands());
    let mut decisions = Vec::with_capacity(sectors);
    for m in 0..sectors {
        let mut rng = sector_rng(m);
        let outcome = optimize_sector(positions, system, policy, m, &mut rng)?;
        let decision = match outcome.chosen {
            Some(i) => {
                let c = outcome.candidates.into_iter().nth(i).expect("chosen index");
                for g in &c.grants {
                    for &n in &g.subbands {
                        matrix.grant(g.user, m, n)?;
                    }
                }
                Some(SectorDecision {
                    sector: m,
                    beam: c.beam.expect("granted candidate has a beam"),
                    beamwidth: c.beamwidth,
                    predicted_gamma: c.gamma.expect("chosen candidate has a score"),
                    grants: c.grants,
                })
            }
            None => None,
        };
        decisions.push(decision);
    }
    Ok(Allocation {
        matrix,
        sectors: decisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DEFAULT_DEG: [f64; 6] = [3.0, 5.0, 10.0, 15.0, 20.0, 30.0];

    fn rad(d: &[f64]) -> Vec<f64> {
        d.iter().map(|x| x.to_radians()).collect()
    }

    fn polar(d: f64, az_deg: f64) -> Position<f64> {
        Position::from_polar(d, az_deg.to_radians())
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn qos_validation() {
        assert!(QosConfig::<f64>::default().validate().is_ok());
        let q = QosConfig {
            rmin_center_bps: 1e9,
            rmin_edge_bps: 1e9,
        };
        assert!(q.validate().is_err());
        let q = QosConfig {
            rmin_center_bps: 1e9,
            rmin_edge_bps: 0.0,
        };
        assert!(q.validate().is_err());
    }

    #[test]
    fn policy_rejects_bad_candidates() {
        assert!(matches!(
            Policy::proposed(&rad(&[7.0]), 3.0, 6),
            Err(AllocatorError::Geometry(
                GeometryError::NonDivisorBeamwidth { .. }
            ))
        ));
        assert!(Policy::proposed(&rad(&[90.0]), 3.0, 6).is_err());
        assert!(matches!(
            Policy::<f64>::proposed(&[], 3.0, 6),
            Err(AllocatorError::NoCandidates)
        ));
        assert!(Policy::proposed(&rad(&[10.0]), -1.0, 6).is_err());
        let p = Policy::proposed(&rad(&[30.0, 3.0, 10.0, 10.0]), 1.0, 6).unwrap();
        let deg: Vec<f64> = p.beamwidths().map(|t| t.to_degrees().round()).collect();
        assert_eq!(deg, vec![3.0, 10.0, 30.0]);
    }

    #[test]
    fn select_beam_by_count() {
        let g = BeamGrid::new(10f64.to_radians(), 6).unwrap();
        let users = [polar(40.0, 2.0), polar(60.0, 3.0), polar(50.0, 14.0)];
        assert_eq!(
            select_beam(&users, &g, 0, &mut rng(1)),
            Some(BeamId::new(0, 0))
        );
        let lone = [polar(40.0, 25.0)];
        assert_eq!(
            select_beam(&lone, &g, 0, &mut rng(1)),
            Some(BeamId::new(0, 2))
        );
        assert_eq!(select_beam(&lone, &g, 1, &mut rng(1)), None);
    }

    #[test]
    fn select_beam_uniform_tie_break() {
        let g = BeamGrid::new(10f64.to_radians(), 6).unwrap();
        let users = [
            polar(40.0, 2.0),
            polar(60.0, 3.0),
            polar(40.0, 44.0),
            polar(60.0, 45.0),
        ];
        let mut r = rng(99);
        let trials = 10_000;
        let first = (0..trials)
            .filter(|_| select_beam(&users, &g, 0, &mut r) == Some(BeamId::new(0, 0)))
            .count();
        let frac = first as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn classification_rules() {
        let g = BeamGrid::new(10f64.to_radians(), 6).unwrap();
        let beam = BeamId::new(0, 2); // [20°, 30°)
                                      // in-beam user exactly δ from the edge
        let a = 50.0 * 2f64.to_radians().sin();
        let users = [
            polar(50.0, 22.0),                                        // a = δ → edge
            polar(50.0, 25.0),                                        // far from edge → center
            polar(10.0, 30.0 + (0.5f64 / 10.0).asin().to_degrees()),  // 0.5 m past the edge
            polar(80.0, 30.0 + (10.0f64 / 80.0).asin().to_degrees()), // 10 m past
            polar(50.0, 45.0),                                        // not adjacent
        ];
        let c = classify_users(&users, &g, beam, a, true);
        let class_of = |k: usize| c.users.iter().find(|u| u.user == k).map(|u| u.class);
        assert_eq!(class_of(0), Some(Some(UserClass::Edge)));
        assert_eq!(class_of(1), Some(Some(UserClass::Center)));
        assert_eq!(class_of(4), None);

        let c3 = classify_users(&users, &g, beam, 3.0, true);
        let class3 = |k: usize| c3.users.iter().find(|u| u.user == k).unwrap().class;
        assert_eq!(class3(2), Some(UserClass::Edge));
        assert_eq!(class3(3), None);
        assert_eq!(c3.excluded().count(), 1);

        let np = classify_users(&users, &g, beam, 3.0, false);
        assert_eq!(np.center().count(), 2);
        assert_eq!(np.edge().count(), 0);
        assert_eq!(np.excluded().count(), 2);
    }

    #[test]
    fn demand_examples() {
        let w = 1.25e8;
        assert_eq!(required_subbands(255.0, 2e9, w), Some(2));
        assert_eq!(required_subbands(255.0, 1e9, w), Some(1));
        // per-subband capacity 0.9 Gbps
        let gamma = 2f64.powf(0.9e9 / w) - 1.0;
        assert_eq!(required_subbands(gamma, 2e9, w), Some(3));
        assert_eq!(required_subbands(0.0, 2e9, w), None);
    }

    #[test]
    fn greedy_trace() {
        let g = allocate_sector(&[Some(2), Some(2), Some(1), Some(4)], 8);
        assert_eq!(g, vec![(0, vec![0, 1]), (1, vec![2, 3]), (2, vec![4])]);
        assert_eq!(allocate_sector(&[Some(8)], 8), vec![(0, (0..8).collect())]);
        assert!(allocate_sector(&[Some(9)], 8).is_empty());
        // skip and continue: a later, smaller demand still fits
        let g = allocate_sector(&[Some(6), Some(3), Some(2)], 8);
        assert_eq!(g, vec![(0, (0..6).collect()), (2, vec![6, 7])]);
        assert!(allocate_sector(&[None, Some(0)], 8).is_empty());
    }

    #[test]
    fn fairness_examples() {
        let e9 = 9f64.exp();
        assert!((fairness([e9, e9]).unwrap() - 18.0).abs() < 1e-12);
        assert!((fairness([1e9f64]).unwrap() - 20.72326583694641).abs() < 1e-12);
        assert_eq!(fairness(std::iter::empty::<f64>()), None);
        assert_eq!(fairness([0.0]), None);
        assert!((fairness([0.0, e9]).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn single_user_prefers_narrowest_beam() {
        // targets low enough that one subband suffices at every beamwidth
        let system = System::<f64> {
            qos: QosConfig {
                rmin_center_bps: 1e6,
                rmin_edge_bps: 5e5,
            },
            ..Default::default()
        };
        let policy = Policy::proposed(&rad(&DEFAULT_DEG), 0.5, 6).unwrap();
        // 15° is centred in the 3°, 10° and 30° beams and inside all others
        let users = [polar(40.0, 16.5)];
        let out = optimize_sector(&users, &system, &policy, 0, &mut rng(3)).unwrap();
        let chosen = out.decision().unwrap();
        assert!((chosen.beamwidth.to_degrees() - 3.0).abs() < 1e-9);
        let scores: Vec<f64> = out.candidates.iter().map(|c| c.gamma.unwrap()).collect();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");
    }

    #[test]
    fn demand_rounding_can_favour_a_wider_beam() {
        // at the default targets the 3° beam needs one subband and 5° needs two,
        // so the wider beam predicts more rate for the same single user
        let system = System::<f64>::default();
        let policy = Policy::proposed(&rad(&DEFAULT_DEG), 0.5, 6).unwrap();
        let users = [polar(40.0, 16.5)];
        let out = optimize_sector(&users, &system, &policy, 0, &mut rng(3)).unwrap();
        let n: Vec<usize> = out
            .candidates
            .iter()
            .map(|c| c.grants[0].subbands.len())
            .collect();
        assert_eq!(n[0], 1);
        assert!(n[1] > 1);
        let chosen = out.decision().unwrap();
        assert!(chosen.beamwidth > 3f64.to_radians());
    }

    #[test]
    fn wide_beam_wins_when_it_serves_more() {
        let system = System::<f64>::default();
        let policy = Policy::proposed(&rad(&DEFAULT_DEG), 0.5, 6).unwrap();
        // two users 25° apart near the sector middle: only a 30° beam covers both
        let users = [polar(40.0, 2.5), polar(40.0, 27.5)];
        let out = optimize_sector(&users, &system, &policy, 0, &mut rng(4)).unwrap();
        // brute force over the candidates
        let best = out
            .candidates
            .iter()
            .filter_map(|c| c.gamma.map(|g| (c.beamwidth, g)))
            .fold(None::<(f64, f64)>, |acc, (t, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((t, g)),
            })
            .unwrap();
        let chosen = out.decision().unwrap();
        assert!((chosen.beamwidth.to_degrees() - 30.0).abs() < 1e-9);
        assert_eq!(chosen.beamwidth, best.0);
        assert_eq!(chosen.grants.len(), 2);
    }

    #[test]
    fn sector_wide_beam_is_pure_subband_allocation() {
        let system = System::<f64>::default();
        let policy = Policy::proposed(&rad(&[60.0]), 1.0, 6).unwrap();
        let users = [polar(30.0, 10.0), polar(60.0, 30.0), polar(90.0, 50.0)];
        let out = optimize_sector(&users, &system, &policy, 0, &mut rng(0)).unwrap();
        let c = out.decision().unwrap();
        assert_eq!(c.beam, Some(BeamId::new(0, 0)));
        assert_eq!(
            c.grants.iter().map(|g| g.user).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn no_protect_demands_center_rate() {
        let system = System::<f64>::default();
        let policy = Policy::no_protect(&rad(&DEFAULT_DEG), 6).unwrap();
        let mut r = rng(5);
        let cell = CellConfig::<f64>::default();
        let users: Vec<_> = (0..60).map(|_| cell.sample_uniform(&mut r)).collect();
        let alloc = allocate(&users, &system, &policy, |m| rng(m as u64)).unwrap();
        for d in alloc.sectors.iter().flatten() {
            assert!(d.grants.iter().all(|g| g.class == UserClass::Center));
        }
    }

    #[test]
    fn fixed_policy_always_reports_its_width() {
        let system = System::<f64>::default();
        let policy = Policy::fixed(10f64.to_radians(), 3.0, 6).unwrap();
        let cell = CellConfig::<f64>::default();
        for seed in 0..20 {
            let mut r = rng(seed);
            let users: Vec<_> = (0..40).map(|_| cell.sample_uniform(&mut r)).collect();
            let alloc = allocate(&users, &system, &policy, |m| rng(seed * 10 + m as u64)).unwrap();
            for d in alloc.sectors.iter().flatten() {
                assert!((d.beamwidth.to_degrees() - 10.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matrix_grant_conflict() {
        let mut m = AllocationMatrix::new(2, 2, 2);
        m.grant(0, 1, 1).unwrap();
        assert!(m.grant(0, 1, 1).is_ok());
        assert!(matches!(
            m.grant(1, 1, 1),
            Err(AllocatorError::BlockTaken { owner: 0, .. })
        ));
        assert_eq!(m.owner(1, 1), Some(0));
        assert_eq!(m.blocks_of(0).collect::<Vec<_>>(), vec![(1, 1)]);
        m.set(1, 0, 1, true);
        assert_eq!(m.interferers(0, 1, 1), 1);
        assert_eq!(m.interferers(1, 0, 1), 1);
        assert_eq!(m.interferers(1, 0, 0), 0);
        assert!(check_constraints(&m).is_ok());
        m.set(1, 1, 1, true);
        assert!(matches!(
            check_constraints(&m),
            Err(ConstraintViolation::SharedBlock {
                sector: 1,
                subband: 1,
                count: 2
            })
        ));
    }

    #[test]
    fn random_frames_respect_constraints() {
        let system = System::<f64>::default();
        let cell = system.cell;
        let policies = [
            Policy::proposed(&rad(&DEFAULT_DEG), 3.0, 6).unwrap(),
            Policy::no_protect(&rad(&DEFAULT_DEG), 6).unwrap(),
            Policy::fixed(3f64.to_radians(), 1.5, 6).unwrap(),
        ];
        for seed in 0..200u64 {
            let mut r = rng(seed);
            let k = 1 + (seed as usize * 7) % 120;
            let users: Vec<_> = (0..k).map(|_| cell.sample_uniform(&mut r)).collect();
            for p in &policies {
                let a = allocate(&users, &system, p, |m| rng(seed ^ m as u64)).unwrap();
                check_constraints(&a.matrix).unwrap();
                for d in a.sectors.iter().flatten() {
                    assert!(p.beamwidths().any(|t| t == d.beamwidth));
                    for g in &d.grants {
                        let want = required_subbands(
                            g.gamma_prime,
                            system.qos.target(g.class),
                            system.budget.subband_bandwidth_hz(),
                        );
                        assert_eq!(Some(g.subbands.len()), want);
                    }
                }
            }
        }
    }

    #[test]
    fn log_base_does_not_change_the_choice() {
        let system = System::<f64>::default();
        let policy = Policy::proposed(&rad(&DEFAULT_DEG), 3.0, 6).unwrap();
        let cell = system.cell;
        for seed in 0..50u64 {
            let mut r = rng(seed);
            let users: Vec<_> = (0..50).map(|_| cell.sample_uniform(&mut r)).collect();
            for m in 0..6 {
                let out =
                    optimize_sector(&users, &system, &policy, m, &mut rng(seed + 100)).unwrap();
                let log2_best = out
                    .candidates
                    .iter()
                    .enumerate()
                    .filter_map(|(i, c)| {
                        let g2: Option<f64> = (!c.grants.is_empty())
                            .then(|| c.grants.iter().map(|g| g.predicted_rate.log2()).sum());
                        g2.map(|g| (i, g))
                    })
                    .fold(None::<(usize, f64)>, |acc, (i, g)| match acc {
                        Some((_, b)) if b >= g => acc,
                        _ => Some((i, g)),
                    })
                    .map(|(i, _)| i);
                assert_eq!(out.chosen, log2_best);
            }
        }
    }

    #[test]
    fn scaling_rates_keeps_argmax() {
        let a = [1e9, 2e9];
        let b = [1.2e9, 1.6e9];
        let c: f64 = 7.5;
        let ga = fairness(a).unwrap();
        let gb = fairness(b).unwrap();
        let gas = fairness(a.map(|r| r * c)).unwrap();
        let gbs = fairness(b.map(|r| r * c)).unwrap();
        assert!((gas - ga - 2.0 * c.ln()).abs() < 1e-9);
        assert!((gbs - gb - 2.0 * c.ln()).abs() < 1e-9);
        assert_eq!(ga > gb, gas > gbs);
    }
}
