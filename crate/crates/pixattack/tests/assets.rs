//! The bundled sample image must stay in sync with its generator. Set
//! `PIXATTACK_REGENERATE_ASSETS=1` to rewrite it.

use std::path::PathBuf;

use pixattack::pnm;
use pixattack::setup::{default_target, sample_image, SAMPLE_CLASS, SAMPLE_SHAPE};
use pixattack_core::Oracle;

#[test]
fn sample_asset_matches_generator() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/sample.ppm");
    let expected = pnm::encode(&sample_image());
    if std::env::var_os("PIXATTACK_REGENERATE_ASSETS").is_some() {
        std::fs::write(&path, &expected).unwrap();
    }
    let found = std::fs::read(&path).unwrap();
    assert!(found == expected, "{} is stale; regenerate it", path.display());
}

#[test]
fn sample_is_classified_as_its_class() {
    let img = sample_image();
    assert_eq!(img.shape(), SAMPLE_SHAPE);
    let r = default_target(SAMPLE_SHAPE).classify(&img).unwrap();
    assert_eq!(r.class(), SAMPLE_CLASS);
}
