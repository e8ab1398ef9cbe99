//! Browser bindings for three quick explorations: the sideband spectrum,
//! the cooling curve against pump power, and the LC pull curve against
//! membrane gap. Each call returns a [`Curve`] for the page to draw.
//!
//! The `*_curve` functions are plain Rust so they can be tested on the host;
//! the exported wrappers only turn errors into JS exceptions.

use std::f64::consts::TAU;

use wasm_bindgen::prelude::*;

use emech::backaction::PumpModel;
use emech::circuit::{
    gap_from_frequency, inductance_from_bare_frequency, resonance_frequency, CircuitModel, PlateModel,
};
use emech::cooling::{cooling_curve, occupation_from_rates};
use emech::spectrum::{rwa_rates_from_full, spectrum_full, spectrum_rwa, FullParams, SpectrumNoise};
use emech::system::{dbm_to_watts, hz_to_angular, watts_to_dbm};

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Optional second series on the same x grid.
    y2: Vec<f64>,
    summary: String,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y2(&self) -> Vec<f64> {
        self.y2.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn check_points(points: usize) -> emech::Result<()> {
    if points < 2 {
        return Err(emech::Error::InvalidParameter {
            name: "points",
            reason: format!("must be at least 2, got {points}"),
        });
    }
    Ok(())
}

/// Output spectrum around the mechanical sideband, in quanta, with the pump
/// detuned `detuning_offset_hz` from the red sideband. `y` is the RWA
/// Lorentzian and `y2` the full linear model.
#[allow(clippy::too_many_arguments)]
pub fn spectrum_curve(
    kappa_hz: f64,
    kappa_ex_hz: f64,
    omega_m_hz: f64,
    gamma_m_hz: f64,
    g_hz: f64,
    detuning_offset_hz: f64,
    n_th: f64,
    n_tilde: f64,
    points: usize,
) -> emech::Result<Curve> {
    check_points(points)?;
    let omega_m = hz_to_angular(omega_m_hz);
    let p = FullParams {
        kappa: hz_to_angular(kappa_hz),
        kappa_ex: hz_to_angular(kappa_ex_hz),
        delta: -omega_m + hz_to_angular(detuning_offset_hz),
        omega_m,
        g: hz_to_angular(g_hz),
        gamma_m: hz_to_angular(gamma_m_hz),
    };
    let noise = SpectrumNoise {
        n_th,
        n_tilde,
        n_add: 0.0,
    };
    let rates = rwa_rates_from_full(&p)?;
    let gamma_eff = (rates.gamma_m + rates.gamma_e) / TAU;
    let center = rates.omega_eff / TAU;
    let x = grid(center - 10.0 * gamma_eff, center + 10.0 * gamma_eff, points);
    let rwa = spectrum_rwa(&x, &rates, &noise)?;
    let full = spectrum_full(&x, &p, &noise)?;
    let n_bar = occupation_from_rates(rates.gamma_m, rates.gamma_e, n_th, n_tilde)?;
    let mut summary = format!(
        "Γ_eff/2π = {gamma_eff:.4} Hz, C = {:.1}, n̄ = {n_bar:.3}",
        rates.gamma_e / rates.gamma_m
    );
    for w in &rwa.metadata.warnings {
        summary.push_str("; ");
        summary.push_str(w);
    }
    Ok(Curve {
        x,
        y: rwa.values().to_vec(),
        y2: full.values().to_vec(),
        summary,
    })
}

/// Phonon occupation against pump power in dBm. `y2` is the cavity-noise
/// floor ñ(P).
pub fn cooling_curve_dbm(
    gamma_m_hz: f64,
    p0_dbm: f64,
    n_th: f64,
    n_tilde_at_p0: f64,
    p_min_dbm: f64,
    p_max_dbm: f64,
    points: usize,
) -> emech::Result<Curve> {
    check_points(points)?;
    let p0 = dbm_to_watts(p0_dbm)?;
    let model = PumpModel::new(hz_to_angular(gamma_m_hz), p0)?;
    let x = grid(p_min_dbm, p_max_dbm, points);
    let powers = x.iter().map(|&d| dbm_to_watts(d)).collect::<emech::Result<Vec<_>>>()?;
    let curve = cooling_curve(&powers, &model, n_th, n_tilde_at_p0 / p0)?;
    let best = curve.minimum();
    Ok(Curve {
        y: curve.points.iter().map(|p| p.n_bar).collect(),
        y2: curve.points.iter().map(|p| p.n_tilde).collect(),
        summary: format!("n̄_min = {:.3} at {:.1} dBm", best.n_bar, watts_to_dbm(best.power)?),
        x,
    })
}

/// Loop resonance in GHz against membrane gap in nm, for a loop whose bare
/// frequency (no membrane) is `bare_ghz`. The summary inverts the curve at
/// `target_ghz`.
#[allow(clippy::too_many_arguments)]
pub fn pull_curve_nm(
    bare_ghz: f64,
    parasitic_ff: f64,
    pad_side_um: f64,
    single_plate: bool,
    d_min_nm: f64,
    d_max_nm: f64,
    target_ghz: f64,
    points: usize,
) -> emech::Result<Curve> {
    check_points(points)?;
    let c_p = parasitic_ff * 1e-15;
    let l = inductance_from_bare_frequency(TAU * bare_ghz * 1e9, c_p)?;
    let plate = if single_plate {
        PlateModel::SinglePlate
    } else {
        PlateModel::SeriesHalfPads
    };
    let area = (pad_side_um * 1e-6).powi(2);
    let model = CircuitModel::new(l, c_p, area, d_max_nm * 1e-9, plate)?;
    let x = grid(d_min_nm, d_max_nm, points);
    let y = x
        .iter()
        .map(|&d| resonance_frequency(d * 1e-9, &model).map(|w| w / TAU / 1e9))
        .collect::<emech::Result<Vec<_>>>()?;
    let summary = match gap_from_frequency(TAU * target_ghz * 1e9, &model) {
        Ok(d) if d.is_finite() => format!("{target_ghz} GHz needs a gap of {:.0} nm", d * 1e9),
        Ok(_) => format!("{target_ghz} GHz is the bare loop: no membrane"),
        Err(e) => format!("{target_ghz} GHz is out of reach: {e}"),
    };
    Ok(Curve {
        x,
        y,
        y2: Vec::new(),
        summary,
    })
}

fn js(e: emech::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn spectrum(
    kappa_hz: f64,
    kappa_ex_hz: f64,
    omega_m_hz: f64,
    gamma_m_hz: f64,
    g_hz: f64,
    detuning_offset_hz: f64,
    n_th: f64,
    n_tilde: f64,
    points: usize,
) -> Result<Curve, JsError> {
    spectrum_curve(
        kappa_hz,
        kappa_ex_hz,
        omega_m_hz,
        gamma_m_hz,
        g_hz,
        detuning_offset_hz,
        n_th,
        n_tilde,
        points,
    )
    .map_err(js)
}

#[wasm_bindgen]
pub fn cooling(
    gamma_m_hz: f64,
    p0_dbm: f64,
    n_th: f64,
    n_tilde_at_p0: f64,
    p_min_dbm: f64,
    p_max_dbm: f64,
    points: usize,
) -> Result<Curve, JsError> {
    cooling_curve_dbm(gamma_m_hz, p0_dbm, n_th, n_tilde_at_p0, p_min_dbm, p_max_dbm, points).map_err(js)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn pull(
    bare_ghz: f64,
    parasitic_ff: f64,
    pad_side_um: f64,
    single_plate: bool,
    d_min_nm: f64,
    d_max_nm: f64,
    target_ghz: f64,
    points: usize,
) -> Result<Curve, JsError> {
    pull_curve_nm(bare_ghz, parasitic_ff, pad_side_um, single_plate, d_min_nm, d_max_nm, target_ghz, points)
        .map_err(js)
}
