//! Conversions between the user-facing units (km, MPa, hours) and SI.

pub const M_PER_KM: f64 = 1000.0;
pub const PA_PER_MPA: f64 = 1.0e6;
pub const S_PER_HR: f64 = 3600.0;

pub fn km_to_m(km: f64) -> f64 {
    km * M_PER_KM
}

pub fn m_to_km(m: f64) -> f64 {
    m / M_PER_KM
}

pub fn mpa_to_pa(mpa: f64) -> f64 {
    mpa * PA_PER_MPA
}

pub fn pa_to_mpa(pa: f64) -> f64 {
    pa / PA_PER_MPA
}

pub fn hr_to_s(hr: f64) -> f64 {
    hr * S_PER_HR
}

pub fn s_to_hr(s: f64) -> f64 {
    s / S_PER_HR
}

/// Cycles per hour to angular-free cycles per second.
pub fn cyc_per_hr_to_hz(w: f64) -> f64 {
    w / S_PER_HR
}

pub fn hz_to_cyc_per_hr(hz: f64) -> f64 {
    hz * S_PER_HR
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn within_ulps(a: f64, b: f64, n: f64) -> bool {
        (a - b).abs() <= n * f64::EPSILON * a.abs().max(b.abs())
    }

    proptest! {
        #[test]
        fn round_trips_are_lossless(v in 1e-6f64..1e6) {
            prop_assert!(within_ulps(m_to_km(km_to_m(v)), v, 4.0));
            prop_assert!(within_ulps(pa_to_mpa(mpa_to_pa(v)), v, 4.0));
            prop_assert!(within_ulps(s_to_hr(hr_to_s(v)), v, 4.0));
            prop_assert!(within_ulps(hz_to_cyc_per_hr(cyc_per_hr_to_hz(v)), v, 4.0));
        }
    }
}
