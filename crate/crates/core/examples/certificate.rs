//! Contraction certificates: Lambda, the step bound and the partition.

use bdsvie::bdsvie::{build_certificate, CertificateOverrides};

fn main() {
    let worked = CertificateOverrides {
        theta: Some(3.0),
        ..Default::default()
    };
    let cert = build_certificate(1.0, 0.5, 1.0, &worked).expect("admissible");
    println!("{}", serde_json::to_string_pretty(&cert).unwrap());

    let defaults = build_certificate(0.5, 0.5, 2.0, &CertificateOverrides::default()).expect("admissible");
    println!("defaults for C=0.5, alpha=0.5, T=2: theta={} a={} Lambda={} intervals={}",
        defaults.theta, defaults.a, defaults.lambda_factor, defaults.n_intervals());

    let bad = CertificateOverrides {
        theta: Some(0.5),
        ..Default::default()
    };
    if let Err(e) = build_certificate(1.0, 0.5, 1.0, &bad) {
        println!("theta = 0.5 rejected: {e}");
    }
}
