//! Emulates lower scan resolutions of one region and reports how much each
//! loses against the 300 dpi original.
//!
//!     cargo run --example emulate_dpi [page.png]

use scanres::corpus::{generate_texture, Texture};
use scanres::metrics::ssim;
use scanres::raster::{emulate_dpi, load_gray};
use scanres::DpiLevel;

fn main() -> scanres::Result<()> {
    let region = match std::env::args().nth(1) {
        Some(path) => load_gray(path.as_ref(), DpiLevel::D300)?,
        None => generate_texture(Texture::Halftone, 96, 7),
    };
    println!("region {}x{} at 300 dpi", region.width(), region.height());
    for dpi in DpiLevel::ASCENDING {
        let pair = emulate_dpi(&region, dpi)?;
        println!(
            "{dpi:>3} dpi: native {:>3}x{:<3} ssim vs original {:.4}",
            pair.native_lowres.width(),
            pair.native_lowres.height(),
            ssim(&region, &pair.at_base)?
        );
    }
    Ok(())
}
