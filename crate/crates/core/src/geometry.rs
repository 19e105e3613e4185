//! Cell, sector and beam geometry.
//!
//! Azimuths live in `[0, 2π)` and sector `m` (0-based) covers
//! `[m·2π/M, (m+1)·2π/M)`. A beamwidth `θ` that divides the sector width
//! splits every sector into `V = 2π/(θM)` half-open beams, so the `M·V`
//! beams tile the circle and every position maps to exactly one beam.
//! Sector and slot indices are 0-based throughout.

use rand::Rng;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("cell radius must be positive, got {0} m")]
    NonPositiveRadius(f64),
    #[error("cell must have at least one sector")]
    NoSectors,
    #[error("beamwidth {theta_deg}° outside (0, {max_deg}°]")]
    BeamwidthOutOfRange { theta_deg: f64, max_deg: f64 },
    #[error("beamwidth {theta_deg}° does not divide the {sector_deg}° sector (ratio {ratio})")]
    NonDivisorBeamwidth {
        theta_deg: f64,
        sector_deg: f64,
        ratio: f64,
    },
}

/// Circular cell centred at the origin, split into equal angular sectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellConfig<T> {
    pub radius_m: T,
    pub num_sectors: usize,
}

impl<T: Real> Default for CellConfig<T> {
    /// 100 m radius, six 60° sectors.
    fn default() -> Self {
        Self {
            radius_m: T::lit(100.0),
            num_sectors: 6,
        }
    }
}

impl<T: Real> CellConfig<T> {
    pub fn new(radius_m: T, num_sectors: usize) -> Result<Self, GeometryError> {
        if !(radius_m > T::zero()) || !radius_m.is_finite() {
            return Err(GeometryError::NonPositiveRadius(radius_m.as_f64()));
        }
        if num_sectors == 0 {
            return Err(GeometryError::NoSectors);
        }
        Ok(Self {
            radius_m,
            num_sectors,
        })
    }

    /// Angular width of one sector, `2π/M`.
    pub fn sector_width(&self) -> T {
        T::TAU() / T::from_usize_lossy(self.num_sectors)
    }

    pub fn contains(&self, pos: &Position<T>) -> bool {
        pos.distance() <= self.radius_m
    }

    /// Area-uniform position inside the cell disc.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Position<T> {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let r = self.radius_m * T::lit(u.sqrt());
        Position::from_polar(r, T::TAU() * T::lit(v))
    }
}

/// Planar position in meters relative to the base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Position<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn from_polar(distance: T, azimuth: T) -> Self {
        Self {
            x: distance * azimuth.cos(),
            y: distance * azimuth.sin(),
        }
    }

    /// Distance from the base station.
    pub fn distance(&self) -> T {
        self.x.hypot(self.y)
    }

    /// Azimuth in `[0, 2π)`.
    pub fn azimuth(&self) -> T {
        wrap_angle(self.y.atan2(self.x))
    }

    pub fn distance_to(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Maps any angle onto `[0, 2π)`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let tau = T::TAU();
    let mut w = a % tau;
    if w < T::zero() {
        w = w + tau;
    }
    if w >= tau {
        w = T::zero();
    }
    w
}

/// Absolute circular difference between two angles, in `[0, π]`.
fn angular_gap<T: Real>(a: T, b: T) -> T {
    let d = wrap_angle(a - b);
    d.min(T::TAU() - d)
}

/// One analog-beamformer pointing direction: sector `m` and intra-sector slot `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeamId {
    pub sector: usize,
    pub slot: usize,
}

impl BeamId {
    pub fn new(sector: usize, slot: usize) -> Self {
        Self { sector, slot }
    }
}

/// Number of beams `V = 2π/(θM)` a sector holds at beamwidth `theta` (radians).
pub fn beams_per_sector<T: Real>(theta: T, num_sectors: usize) -> Result<usize, GeometryError> {
    if num_sectors == 0 {
        return Err(GeometryError::NoSectors);
    }
    let sector = T::TAU() / T::from_usize_lossy(num_sectors);
    let tol = T::integrality_tol();
    if !(theta > T::zero()) || !theta.is_finite() || theta > sector * (T::one() + tol) {
        return Err(GeometryError::BeamwidthOutOfRange {
            theta_deg: theta.to_degrees().as_f64(),
            max_deg: sector.to_degrees().as_f64(),
        });
    }
    let ratio = sector / theta;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > tol || rounded < T::one() {
        return Err(GeometryError::NonDivisorBeamwidth {
            theta_deg: theta.to_degrees().as_f64(),
            sector_deg: sector.to_degrees().as_f64(),
            ratio: ratio.as_f64(),
        });
    }
    Ok(rounded.to_usize().expect("positive beam count"))
}

/// The beam layout of the whole cell for one beamwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGrid<T> {
    beamwidth: T,
    num_sectors: usize,
    per_sector: usize,
}

impl<T: Real> BeamGrid<T> {
    pub fn new(beamwidth: T, num_sectors: usize) -> Result<Self, GeometryError> {
        let per_sector = beams_per_sector(beamwidth, num_sectors)?;
        Ok(Self {
            beamwidth,
            num_sectors,
            per_sector,
        })
    }

    pub fn beamwidth(&self) -> T {
        self.beamwidth
    }

    pub fn num_sectors(&self) -> usize {
        self.num_sectors
    }

    pub fn per_sector(&self) -> usize {
        self.per_sector
    }

    fn total(&self) -> usize {
        self.num_sectors * self.per_sector
    }

    fn global_index(&self, beam: BeamId) -> usize {
        beam.sector * self.per_sector + beam.slot
    }

    fn beam_at(&self, g: usize) -> BeamId {
        BeamId::new(g / self.per_sector, g % self.per_sector)
    }

    /// Every beam in sector `sector`, in slot order.
    pub fn sector_beams(&self, sector: usize) -> impl Iterator<Item = BeamId> {
        (0..self.per_sector).map(move |slot| BeamId::new(sector, slot))
    }

    /// Angular interval `[start, end)` covered by `beam`.
    pub fn span(&self, beam: BeamId) -> (T, T) {
        let g = T::from_usize_lossy(self.global_index(beam));
        (g * self.beamwidth, (g + T::one()) * self.beamwidth)
    }

    /// Beam whose half-open interval contains the azimuth of `pos`.
    pub fn beam_of(&self, pos: &Position<T>) -> BeamId {
        let idx = (pos.azimuth() / self.beamwidth).floor();
        let g = idx.to_usize().unwrap_or(0).min(self.total() - 1);
        self.beam_at(g)
    }

    /// Previous and next beam around the circle; wraps across sector boundaries.
    pub fn adjacent(&self, beam: BeamId) -> (BeamId, BeamId) {
        let n = self.total();
        let g = self.global_index(beam);
        (self.beam_at((g + n - 1) % n), self.beam_at((g + 1) % n))
    }

    /// Euclidean distance from `pos` to the nearer of the two boundary rays of `beam`.
    ///
    /// Inside the beam (or within 90° of a ray) this is `d·sin(Δφ)`; past 90°
    /// the closest point of a ray is its origin, so the distance is `d`.
    pub fn edge_distance(&self, pos: &Position<T>, beam: BeamId) -> T {
        let (start, end) = self.span(beam);
        let az = pos.azimuth();
        let d = pos.distance();
        let to_ray = |ray: T| {
            let gap = angular_gap(az, ray);
            if gap <= T::FRAC_PI_2() {
                d * gap.sin()
            } else {
                d
            }
        };
        to_ray(start).min(to_ray(end))
    }

    /// Azimuth inside the beam's interval and distance within the cell.
    pub fn in_coverage(&self, pos: &Position<T>, beam: BeamId, cell: &CellConfig<T>) -> bool {
        cell.contains(pos) && self.beam_of(pos) == beam
    }
}

/// Draws the true position uniformly over the disc of radius `beta` around `estimated`.
///
/// Samples that leave the cell are pulled radially back onto its boundary.
/// That projection is non-expansive, so the displacement never exceeds `beta`.
pub fn sample_actual_position<T: Real, R: Rng + ?Sized>(
    estimated: &Position<T>,
    beta: T,
    cell: &CellConfig<T>,
    rng: &mut R,
) -> Position<T> {
    if beta <= T::zero() {
        return *estimated;
    }
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let r = beta * T::lit(u.sqrt());
    let phi = T::TAU() * T::lit(v);
    let moved = Position::new(estimated.x + r * phi.cos(), estimated.y + r * phi.sin());
    clip_to_cell(moved, cell)
}

fn clip_to_cell<T: Real>(pos: Position<T>, cell: &CellConfig<T>) -> Position<T> {
    let d = pos.distance();
    if d <= cell.radius_m {
        pos
    } else {
        let s = cell.radius_m / d;
        Position::new(pos.x * s, pos.y * s)
    }
}
