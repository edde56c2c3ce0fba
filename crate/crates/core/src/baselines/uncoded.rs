use crate::channel::snr_db_to_sigma;

/// Standard Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Bit error rate of hard-decided uncoded BPSK with unit symbol energy,
/// `Q(1 / sigma)`.
pub fn uncoded_bpsk_ber(snr_db: f64) -> f64 {
    let sigma = snr_db_to_sigma(snr_db);
    q_function(1.0 / sigma)
}
