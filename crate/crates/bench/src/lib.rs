//! Benchmark fixtures shared by the criterion benches.

use drcn_core::NetworkConfig;

/// The two operating points used throughout the comparison figures.
pub fn fig3_config(h3: f64) -> NetworkConfig {
    NetworkConfig::with_common_power(0.15, 1.0, h3, 100.0).expect("valid fixture")
}

pub fn fig4_config(snr2_db: f64) -> NetworkConfig {
    let p = 10f64.powf(snr2_db / 10.0);
    NetworkConfig::with_common_power(0.5, 1.0, 2.0, p).expect("valid fixture")
}
