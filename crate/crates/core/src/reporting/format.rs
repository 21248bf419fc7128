//! Fixed number formatting for human-readable renders.

/// Three significant digits; scientific notation outside `[1e-3, 1e5)`.
pub fn sig3(x: f64) -> String {
    if !x.is_finite() {
        return "n/a".to_string();
    }
    if x == 0.0 {
        return "0.00".to_string();
    }
    // round to three significant digits first so carries (9.996 -> 10.0) land right
    let rounded: f64 = format!("{x:.2e}").parse().unwrap_or(x);
    let exponent = rounded.abs().log10().floor() as i32;
    if !(-3..5).contains(&exponent) {
        return format!("{x:.2e}");
    }
    let decimals = (2 - exponent).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Three decimal places, or `n/a`.
pub fn fixed3(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => {
            let text = format!("{v:.3}");
            if text == "-0.000" { "0.000".to_string() } else { text }
        }
        _ => "n/a".to_string(),
    }
}

/// Shortest round-trip representation; empty for undefined values.
pub fn exact(x: f64) -> String {
    if x.is_finite() { x.to_string() } else { String::new() }
}

pub fn exact_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, exact)
}
