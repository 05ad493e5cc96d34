use pixattack::files::{load_attention, load_image, load_mask, save_attention, save_image, save_mask};
use pixattack::model_file::{format_model, load_model, parse_model, save_model};
use pixattack::setup::{default_proxy, default_target, sample_image};
use pixattack::{pnm, FormatError};
use pixattack_core::toy::toy_proxy_spec;
use pixattack_core::attack::attack_mask;
use pixattack_core::{AttentionMap, ConvGap, Image, LinearSoftmax, Parity, PixelMask, Shape, ToyModel};
use proptest::prelude::*;

#[test]
fn attention_round_trip_and_size_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.pgm");
    let map = AttentionMap::new(3, 4, (0..12).map(|v| v * 21).collect()).unwrap();
    save_attention(&path, &map).unwrap();
    assert_eq!(load_attention(&path, Some((3, 4))).unwrap(), map);
    assert!(matches!(
        load_attention(&path, Some((4, 3))),
        Err(FormatError::SizeMismatch { expected: (4, 3), found: (3, 4) })
    ));
}

#[test]
fn colour_file_is_not_an_attention_map() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rgb.ppm");
    std::fs::write(&path, pnm::encode(&Image::filled(2, 2, 3, 1).unwrap())).unwrap();
    assert!(load_attention(&path, None).is_err());
}

#[test]
fn mask_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pgm");
    let mask = PixelMask::from_bits(2, 3, vec![true, false, false, true, true, false]).unwrap();
    save_mask(&path, &mask).unwrap();
    assert_eq!(load_mask(&path, Some((2, 3))).unwrap(), mask);
    assert_eq!(pnm::decode(&std::fs::read(&path).unwrap()).unwrap().data(), &[255, 0, 0, 255, 255, 0]);
}

#[test]
fn hand_authored_attention_selects_its_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hand.pgm");
    let mut bytes = b"P5\n# two salient pixels\n4 4\n255\n".to_vec();
    let mut raster = [0u8; 16];
    raster[0] = 9; // (0,0)
    raster[2 * 4 + 2] = 1; // (2,2)
    bytes.extend(raster);
    std::fs::write(&path, bytes).unwrap();
    let map = load_attention(&path, Some((4, 4))).unwrap();
    let image = Image::filled(4, 4, 3, 100).unwrap();
    let (mask, fallback) = attack_mask(&image, Some(&map), true, Parity::Even).unwrap();
    assert!(!fallback);
    assert_eq!(mask.positions().collect::<Vec<_>>(), vec![(0, 0), (2, 2)]);
}

#[test]
fn image_formats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = sample_image();
    for name in ["s.png", "s.ppm", "s.pnm"] {
        let path = dir.path().join(name);
        save_image(&path, &img).unwrap();
        assert_eq!(load_image(&path).unwrap(), img, "{name}");
    }
    let gray = Image::new(2, 2, 1, vec![0, 1, 2, 3]).unwrap();
    for name in ["g.png", "g.pgm"] {
        let path = dir.path().join(name);
        save_image(&path, &gray).unwrap();
        assert_eq!(load_image(&path).unwrap(), gray, "{name}");
    }
    assert!(matches!(
        save_image(&dir.path().join("x.bmp"), &gray),
        Err(FormatError::UnsupportedExtension(_))
    ));
}

#[test]
fn model_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let models = [
        ToyModel::Linear(default_target(Shape::new(4, 3, 3))),
        ToyModel::ConvGap(default_proxy(3)),
        ToyModel::ConvGap(ConvGap::seeded(toy_proxy_spec(1, 4), 3).unwrap()),
    ];
    for (i, model) in models.into_iter().enumerate() {
        let path = dir.path().join(format!("m{i}.txt"));
        save_model(&path, &model).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }
}

#[test]
fn model_file_errors_name_the_line() {
    let text = "toy-model v1\nkind = linear\nheight = 1\nwidth = 1\nchannels = 1\nclasses = 2\nweights = 1 2\nbias = 0 0\nextra = 1\n";
    let err = parse_model(text).unwrap_err().to_string();
    assert!(err.contains("extra"), "{err}");
    assert!(parse_model("not a model\n").is_err());
    let short = "toy-model v1\nkind = linear\nheight = 1\nwidth = 1\nchannels = 1\nclasses = 2\nweights = 1\nbias = 0 0\n";
    assert!(parse_model(short).is_err());
}

proptest! {
    #[test]
    fn linear_models_survive_text(weights in proptest::collection::vec(-1e3f64..1e3, 6), bias in proptest::collection::vec(-5f64..5.0, 2)) {
        let model = ToyModel::Linear(LinearSoftmax::new(Shape::new(1, 3, 1), 2, weights, bias).unwrap());
        prop_assert_eq!(parse_model(&format_model(&model)).unwrap(), model);
    }
}
