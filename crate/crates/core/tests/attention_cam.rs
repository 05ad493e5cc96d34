use pixattack_core::attention::{compute_cam, rescale_to_u8, upsample, AttentionMap, Upsampling};
use pixattack_core::image::Image;
use pixattack_core::masking::{binarize, parity_refine, Parity};
use pixattack_core::toy::{toy_proxy_spec, ConvGap, TOY_CLASSES};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
    Image::new(h, w, c, (0..h * w * c).map(|_| rng.random()).collect()).unwrap()
}

#[test]
fn output_matches_image_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let proxy = ConvGap::seeded(toy_proxy_spec(3, TOY_CLASSES), 11).unwrap();
    for (h, w) in [(32, 32), (7, 13), (1, 1), (33, 5)] {
        let img = random_image(&mut rng, h, w, 3);
        for mode in [Upsampling::Bilinear, Upsampling::Nearest] {
            let map = compute_cam(&proxy, &img, mode).unwrap();
            assert_eq!((map.height(), map.width()), (h, w));
        }
    }
}

#[test]
fn channel_mismatch_is_an_error() {
    let proxy = ConvGap::seeded(toy_proxy_spec(3, 4), 0).unwrap();
    assert!(compute_cam(&proxy, &Image::filled(4, 4, 1, 0).unwrap(), Upsampling::Bilinear).is_err());
}

#[test]
fn unaffected_by_shifting_other_classes_down() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let proxy = ConvGap::seeded(toy_proxy_spec(3, 6), 5).unwrap();
    for _ in 0..20 {
        let img = random_image(&mut rng, 16, 16, 3);
        let top = proxy.predict(&img).unwrap();
        // pooled features are nonnegative, so lowering other classes' weights
        // cannot change the top class
        let shift = -rng.random_range(0.0..3.0);
        let spec = proxy.spec();
        let mut cw = proxy.class_weights().to_vec();
        for k in 0..spec.filters {
            for c in 0..spec.classes {
                if c != top {
                    cw[k * spec.classes + c] += shift;
                }
            }
        }
        let shifted = ConvGap::new(
            spec,
            proxy.filter_weights().to_vec(),
            proxy.filter_bias().to_vec(),
            cw,
            proxy.class_bias().to_vec(),
        )
        .unwrap();
        assert_eq!(shifted.predict(&img).unwrap(), top);
        assert_eq!(
            compute_cam(&shifted, &img, Upsampling::Bilinear).unwrap(),
            compute_cam(&proxy, &img, Upsampling::Bilinear).unwrap()
        );
    }
}

proptest! {
    #[test]
    fn rescaling_is_monotone(values in proptest::collection::vec(0.0f64..100.0, 1..60)) {
        let q = rescale_to_u8(&values);
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] > values[j] {
                    prop_assert!(q[i] >= q[j]);
                }
            }
        }
    }

    #[test]
    fn upsampling_stays_within_source_range(
        src in proptest::collection::vec(0.0f64..10.0, 16),
        h in 1usize..20,
        w in 1usize..20,
    ) {
        let lo = src.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for mode in [Upsampling::Bilinear, Upsampling::Nearest] {
            let up = upsample(&src, 4, 4, h, w, mode);
            prop_assert_eq!(up.len(), h * w);
            prop_assert!(up.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }
}

#[test]
fn hand_authored_map_selects_its_pixels() {
    let mut values = vec![0u8; 6 * 6];
    values[2 * 6 + 2] = 17; // (2,2): even
    values[4 * 6] = 255; // (4,0): even
    values[3 * 6 + 4] = 9; // (3,4): odd
    let map = AttentionMap::new(6, 6, values).unwrap();
    let mask = binarize(&map);
    assert_eq!(mask.positions().collect::<Vec<_>>(), vec![(2, 2), (3, 4), (4, 0)]);
    let refined = parity_refine(&mask, Parity::Even);
    assert_eq!(refined.positions().collect::<Vec<_>>(), vec![(2, 2), (4, 0)]);
}
