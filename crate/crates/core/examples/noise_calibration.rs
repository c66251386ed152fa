//! Finds the Gaussian variance and salt-and-pepper density that degrade a
//! set of textures to a target mean SSIM.
//!
//!     cargo run --release --example noise_calibration [target]

use scanres::corpus::{generate_texture, Texture};
use scanres::noise::{calibrate_noise, CalibrationTarget, NoiseKind};

fn main() -> scanres::Result<()> {
    let target: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.63);
    let images: Vec<_> = (0..12).map(|i| generate_texture(Texture::ALL[i % 4], 64, i as u64)).collect();
    let target = CalibrationTarget::new(target, 0.01)?;
    for kind in [NoiseKind::Gaussian, NoiseKind::SaltPepper] {
        let c = calibrate_noise(kind, &images, target, 1)?;
        println!(
            "{:<12} parameter {:.5}  mean ssim {:.4}  evaluations {}{}",
            kind.name(),
            c.parameter,
            c.mean_ssim,
            c.evaluations,
            if c.grid_fallback { "  (grid fallback)" } else { "" }
        );
    }
    Ok(())
}
