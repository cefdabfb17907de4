//! Conversions between metered gas volume, delivered heat, and heat-pump
//! electricity. All quantities are annual totals; heat and electricity in
//! kWh, gas volume in m3.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gas-to-heat conversion parameters. Heat is volume * z * heating value *
/// furnace efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasParams {
    /// Volume correction factor (billing vs. norm conditions).
    pub z: f64,
    /// Lower heating value of the delivered gas, kWh per m3.
    pub heating_value_kwh_per_m3: f64,
    /// Seasonal furnace efficiency, heat out over fuel energy in.
    pub furnace_efficiency: f64,
}

impl Default for GasParams {
    fn default() -> Self {
        GasParams {
            z: 0.95,
            heating_value_kwh_per_m3: 10.5,
            furnace_efficiency: 0.9,
        }
    }
}

impl GasParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.z > 0.0 && self.z.is_finite()) {
            return Err(Error::invalid("z", format!("must be positive, got {}", self.z)));
        }
        if !(self.heating_value_kwh_per_m3 > 0.0 && self.heating_value_kwh_per_m3.is_finite()) {
            return Err(Error::invalid(
                "heating_value_kwh_per_m3",
                format!("must be positive, got {}", self.heating_value_kwh_per_m3),
            ));
        }
        if !(self.furnace_efficiency > 0.0 && self.furnace_efficiency <= 1.0) {
            return Err(Error::invalid(
                "furnace_efficiency",
                format!("must be in (0, 1], got {}", self.furnace_efficiency),
            ));
        }
        Ok(())
    }
}

/// Retrofit parameters: gamma is the fraction by which heat demand drops
/// after the envelope work that accompanies a heat-pump installation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrofitParams {
    pub gamma: f64,
}

impl Default for RetrofitParams {
    fn default() -> Self {
        RetrofitParams { gamma: 0.105 }
    }
}

impl RetrofitParams {
    pub fn new(gamma: f64) -> Result<Self> {
        validate_gamma(gamma)?;
        Ok(RetrofitParams { gamma })
    }
}

pub fn validate_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(
            "gamma",
            format!("must be in [0, 1), got {gamma}"),
        ));
    }
    Ok(())
}

/// Annual heat delivered by a gas furnace burning `volume_m3` of gas.
pub fn gas_to_heat(volume_m3: f64, params: &GasParams) -> f64 {
    debug_assert!(volume_m3 >= 0.0);
    volume_m3 * params.z * params.heating_value_kwh_per_m3 * params.furnace_efficiency
}

/// Heat demand after retrofit: the pre-retrofit demand reduced by gamma.
pub fn retrofit_heat(heat_kwh: f64, gamma: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&gamma));
    heat_kwh * (1.0 - gamma)
}

/// Seasonal performance factor: heat delivered per unit electricity.
pub fn spf(heat_kwh: f64, electricity_kwh: f64) -> Result<f64> {
    if electricity_kwh == 0.0 {
        return Err(Error::ZeroElectricity {
            context: "spf".to_string(),
        });
    }
    Ok(heat_kwh / electricity_kwh)
}

/// Electricity a heat pump needs to cover the retrofitted heat demand.
pub fn predict_electricity(heat_kwh: f64, gamma: f64, spf: f64) -> Result<f64> {
    if !(spf > 0.0) {
        return Err(Error::invalid("spf", format!("must be positive, got {spf}")));
    }
    validate_gamma(gamma)?;
    Ok(heat_kwh * (1.0 - gamma) / spf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gas_to_heat_reference_point() {
        let p = GasParams::default();
        assert_eq!(gas_to_heat(1000.0, &p), 8977.5);
        assert_eq!(gas_to_heat(0.0, &p), 0.0);
    }

    #[test]
    fn retrofit_reference_point() {
        assert!((retrofit_heat(100.0, 0.105) - 89.5).abs() < 1e-12);
        assert_eq!(retrofit_heat(100.0, 0.0), 100.0);
    }

    #[test]
    fn spf_reference_point() {
        assert_eq!(spf(8977.5, 2992.5).unwrap(), 3.0);
        assert!(matches!(
            spf(1.0, 0.0),
            Err(Error::ZeroElectricity { .. })
        ));
    }

    #[test]
    fn predicted_electricity_reference_point() {
        // 8950 kWh of furnace heat, gamma 0.105, spf 2.9535: the combined
        // divisor is exactly 8950 / 3.3.
        let e = predict_electricity(8950.0, 0.105, 2.9535).unwrap();
        assert!((e - 8950.0 / 3.3).abs() < 1e-9, "got {e}");
        assert!((e - 2712.121212).abs() < 1e-3);
    }

    #[test]
    fn predict_rejects_bad_spf() {
        assert!(predict_electricity(1.0, 0.1, 0.0).is_err());
        assert!(predict_electricity(1.0, 0.1, -2.0).is_err());
        assert!(predict_electricity(1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn gas_params_validation() {
        assert!(GasParams::default().validate().is_ok());
        let bad = GasParams {
            furnace_efficiency: 1.2,
            ..GasParams::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        // predict * spf and retrofit describe the same heat.
        #[test]
        fn predict_inverts_retrofit(
            q in 1e-3..1e7f64,
            gamma in 0.0..0.9f64,
            s in 0.5..8.0f64,
        ) {
            let e = predict_electricity(q, gamma, s).unwrap();
            let back = e * s;
            let want = retrofit_heat(q, gamma);
            prop_assert!((back - want).abs() <= 1e-12 * want.max(1.0));
        }

        #[test]
        fn spf_inverts_division(q in 1e-3..1e7f64, e in 1e-3..1e6f64) {
            let s = spf(q, e).unwrap();
            prop_assert!((s * e - q).abs() <= 1e-12 * q.max(1.0));
        }

        #[test]
        fn heat_scales_linearly(v in 0.0..1e6f64, k in 0.1..10.0f64) {
            let p = GasParams::default();
            let a = gas_to_heat(v * k, &p);
            let b = gas_to_heat(v, &p) * k;
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
