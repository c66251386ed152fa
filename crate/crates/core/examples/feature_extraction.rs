//! Prints the nine-feature vector of one region at every candidate dpi.
//!
//!     cargo run --example feature_extraction

use scanres::corpus::{generate_texture, Texture};
use scanres::metrics::{extract_features, tile_size, Feature};
use scanres::raster::emulate_dpi;
use scanres::DpiLevel;

fn main() -> scanres::Result<()> {
    let region = generate_texture(Texture::Strokes, 96, 21);
    print!("{:<11}", "feature");
    for dpi in DpiLevel::ASCENDING {
        print!("{:>12}", format!("{dpi} (t{})", tile_size(dpi)));
    }
    println!();
    let vectors = DpiLevel::ASCENDING
        .iter()
        .map(|&dpi| extract_features(&region, &emulate_dpi(&region, dpi)?, dpi))
        .collect::<scanres::Result<Vec<_>>>()?;
    for f in Feature::ALL {
        print!("{:<11}", f.name());
        for v in &vectors {
            print!("{:>12.4}", v.get(f));
        }
        println!();
    }
    Ok(())
}
