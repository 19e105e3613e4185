//! Link budget, flat-top beam gains, pathloss, Rayleigh fading and SINR/rate evaluation.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scalar::{dbm_to_mw, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("beamwidth must be in (0, 2π], got {0} rad")]
    Beamwidth(f64),
    #[error("sidelobe level must be in (0, 0.1), got {0}")]
    SidelobeLevel(f64),
    #[error("distance must be positive, got {0} km")]
    Distance(f64),
    #[error("{field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field} must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
}

/// Flat-top mainlobe gain `(2π − (2π − θ)ε)/θ`. The sidelobe gain is `ε` itself.
pub fn mainlobe_gain<T: Real>(theta: T, eps: T) -> Result<T, ChannelError> {
    if !(theta > T::zero()) || theta > T::TAU() {
        return Err(ChannelError::Beamwidth(theta.as_f64()));
    }
    Ok((T::TAU() - (T::TAU() - theta) * eps) / theta)
}

/// `98.4 + 20·log10(f[GHz]) + 10·α·log10(R[km])` in dB.
pub fn pathloss_db<T: Real>(f_ghz: T, dist_km: T, alpha: T) -> Result<T, ChannelError> {
    if !(f_ghz > T::zero()) {
        return Err(ChannelError::NonPositive {
            field: "carrier_freq_ghz",
            value: f_ghz.as_f64(),
        });
    }
    if !(dist_km > T::zero()) {
        return Err(ChannelError::Distance(dist_km.as_f64()));
    }
    let ten = T::lit(10.0);
    Ok(T::lit(98.4) + T::lit(20.0) * f_ghz.log10() + ten * alpha * dist_km.log10())
}

/// Thermal noise `N₀ + 10·log10(W)` in dBm.
pub fn noise_power_dbm<T: Real>(n0_dbm_hz: T, w_hz: T) -> T {
    debug_assert!(w_hz > T::zero());
    n0_dbm_hz + T::lit(10.0) * w_hz.log10()
}

/// Downlink link budget for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget<T> {
    pub tx_power_dbm_per_sector: T,
    pub noise_density_dbm_hz: T,
    pub system_bandwidth_hz: T,
    pub num_subbands: usize,
    pub carrier_freq_ghz: T,
    pub pathloss_exp: T,
    /// Linear sidelobe gain ε.
    pub sidelobe_level: T,
    /// Distances below this are clamped before computing pathloss.
    pub min_distance_m: T,
}

impl<T: Real> Default for LinkBudget<T> {
    /// 30 dBm per sector, −174 dBm/Hz, 1 GHz split into 8 subbands at 60 GHz, α = 2, ε = 0.01.
    fn default() -> Self {
        Self {
            tx_power_dbm_per_sector: T::lit(30.0),
            noise_density_dbm_hz: T::lit(-174.0),
            system_bandwidth_hz: T::lit(1e9),
            num_subbands: 8,
            carrier_freq_ghz: T::lit(60.0),
            pathloss_exp: T::lit(2.0),
            sidelobe_level: T::lit(0.01),
            min_distance_m: T::one(),
        }
    }
}

impl<T: Real> LinkBudget<T> {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let finite = |field, v: T| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ChannelError::NonFinite {
                    field,
                    value: v.as_f64(),
                })
            }
        };
        let positive = |field, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(ChannelError::NonPositive {
                    field,
                    value: v.as_f64(),
                })
            }
        };
        finite("tx_power_dbm_per_sector", self.tx_power_dbm_per_sector)?;
        finite("noise_density_dbm_hz", self.noise_density_dbm_hz)?;
        positive("system_bandwidth_hz", self.system_bandwidth_hz)?;
        positive("carrier_freq_ghz", self.carrier_freq_ghz)?;
        positive("pathloss_exp", self.pathloss_exp)?;
        positive("min_distance_m", self.min_distance_m)?;
        if self.num_subbands == 0 {
            return Err(ChannelError::NonPositive {
                field: "num_subbands",
                value: 0.0,
            });
        }
        if !(self.sidelobe_level > T::zero() && self.sidelobe_level < T::lit(0.1)) {
            return Err(ChannelError::SidelobeLevel(self.sidelobe_level.as_f64()));
        }
        Ok(())
    }

    /// Subband width `W = bandwidth / N`.
    pub fn subband_bandwidth_hz(&self) -> T {
        self.system_bandwidth_hz / T::from_usize_lossy(self.num_subbands)
    }

    /// Equal split of the sector power over the `N` subbands, in mW.
    pub fn power_per_subband_mw(&self) -> T {
        dbm_to_mw(self.tx_power_dbm_per_sector) / T::from_usize_lossy(self.num_subbands)
    }

    /// `N₀·W` in mW.
    pub fn noise_mw(&self) -> T {
        dbm_to_mw(noise_power_dbm(
            self.noise_density_dbm_hz,
            self.subband_bandwidth_hz(),
        ))
    }

    /// Linear channel gain (inverse pathloss) at `distance_m`, clamped to the minimum distance.
    pub fn channel_gain(&self, distance_m: T) -> T {
        let d_km = distance_m.max(self.min_distance_m) / T::lit(1000.0);
        let pl = pathloss_db(self.carrier_freq_ghz, d_km, self.pathloss_exp)
            .expect("validated budget and clamped distance");
        T::lit(10.0).powf(-pl / T::lit(10.0))
    }

    /// Shannon rate of one subband at SINR `sinr`, in bit/s.
    pub fn subband_rate(&self, sinr: T) -> T {
        self.subband_bandwidth_hz() * sinr.ln_1p() / T::LN_2()
    }
}

/// Position-only SINR estimate: no fading, every other sector assumed busy on the subband.
///
/// With `M` sectors there are exactly `M − 1` interferers, each attenuated by `ε²`.
pub fn estimated_sinr<T: Real>(
    budget: &LinkBudget<T>,
    num_sectors: usize,
    beamwidth: T,
    distance_m: T,
) -> Result<T, ChannelError> {
    let g = mainlobe_gain(beamwidth, budget.sidelobe_level)?;
    let p = budget.power_per_subband_mw();
    let l = budget.channel_gain(distance_m);
    let eps2 = budget.sidelobe_level * budget.sidelobe_level;
    let interferers = T::from_usize_lossy(num_sectors.saturating_sub(1));
    Ok(p * g * g * l / (interferers * p * l * eps2 + budget.noise_mw()))
}

/// Realized SINR on one resource block.
///
/// `fading_gain` is the victim's `|h|²` on this block and `interferers` the
/// number of other-sector blocks active on the same subband. Each interference
/// term reuses the victim's own `|h|²` and distance with a sidelobe product `ε²`.
pub fn true_sinr<T: Real>(
    budget: &LinkBudget<T>,
    beamwidth: T,
    distance_m: T,
    fading_gain: T,
    interferers: usize,
) -> Result<T, ChannelError> {
    let g = mainlobe_gain(beamwidth, budget.sidelobe_level)?;
    let p = budget.power_per_subband_mw();
    let l = budget.channel_gain(distance_m);
    let eps2 = budget.sidelobe_level * budget.sidelobe_level;
    let rx = p * fading_gain * l;
    Ok(rx * g * g / (T::from_usize_lossy(interferers) * rx * eps2 + budget.noise_mw()))
}

/// Sum of `W·log2(1 + γ)` over a user's allocated blocks.
pub fn user_rate<T: Real, I: IntoIterator<Item = T>>(sinrs: I, w_hz: T) -> T {
    sinrs
        .into_iter()
        .map(|g| w_hz * g.ln_1p() / T::LN_2())
        .fold(T::zero(), |a, b| a + b)
}

/// Rayleigh block-fading coefficients `h ~ CN(0, 1)` for every (user, sector, subband).
#[derive(Debug, Clone, PartialEq)]
pub struct FadingRealization<T> {
    users: usize,
    sectors: usize,
    subbands: usize,
    h: Vec<Complex<T>>,
}

impl<T: Real> FadingRealization<T> {
    pub fn sample<R: Rng + ?Sized>(
        rng: &mut R,
        users: usize,
        sectors: usize,
        subbands: usize,
    ) -> Self {
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let h = (0..users * sectors * subbands)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(T::lit(re * scale), T::lit(im * scale))
            })
            .collect();
        Self {
            users,
            sectors,
            subbands,
            h,
        }
    }

    /// Every coefficient equal to one.
    pub fn unity(users: usize, sectors: usize, subbands: usize) -> Self {
        Self {
            users,
            sectors,
            subbands,
            h: vec![Complex::new(T::one(), T::zero()); users * sectors * subbands],
        }
    }

    pub fn coefficient(&self, user: usize, sector: usize, subband: usize) -> Complex<T> {
        debug_assert!(user < self.users && sector < self.sectors && subband < self.subbands);
        self.h[(user * self.sectors + sector) * self.subbands + subband]
    }

    /// `|h|²` on one block.
    pub fn power_gain(&self, user: usize, sector: usize, subband: usize) -> T {
        self.coefficient(user, sector, subband).norm_sqr()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.users, self.sectors, self.subbands)
    }
}
