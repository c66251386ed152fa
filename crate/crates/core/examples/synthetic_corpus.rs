//! Generates a synthetic rated corpus and writes it to disk in the layout the
//! command line tool reads.
//!
//!     cargo run --release --example synthetic_corpus [out_dir]

use scanres::corpus::{synth_corpus, SynthSpec};
use scanres::DpiLevel;

fn main() -> scanres::Result<()> {
    let corpus = synth_corpus(&SynthSpec::new(40, 1))?;
    for dpi in DpiLevel::ASCENDING {
        println!("{dpi:>3} dpi: {:.1}% unacceptable", 100.0 * corpus.unacceptable_fraction(dpi));
    }
    println!("{} ratings from {} regions", corpus.ratings.len(), corpus.regions.len());
    if let Some(dir) = std::env::args().nth(1) {
        let manifest = corpus.write(dir.as_ref())?;
        println!("wrote {}", manifest.display());
    }
    Ok(())
}
