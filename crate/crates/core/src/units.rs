//! Decibel helpers.

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10·log10(x)`; non-positive inputs map to `-inf`.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// 30 dBm is 1 W.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Amplitude ratio for a power ratio given in dB.
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
