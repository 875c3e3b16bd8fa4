mod common;

use common::{rng, uniform};
use nircolor::nets::{
    build_discriminator, build_generator, BundleSpec, DiscriminatorSpec, Generator, GeneratorSpec,
    InferencePath, ModelBundle, NetId, ParamKind, Params,
};
use nircolor::Tensor;

/// `(in, out, kernel)` of every convolution of the (1 -> 3, 64, base 16, depth 4) generator.
const LAYER_TABLE: [(usize, usize, usize); 9] = [
    (1, 16, 4),
    (16, 32, 4),
    (32, 64, 4),
    (64, 128, 4),
    (128, 64, 4),
    (128, 32, 4),
    (64, 16, 4),
    (32, 16, 4),
    (16, 3, 1),
];

#[test]
fn parameter_count_matches_layer_table() {
    let expected: usize = LAYER_TABLE.iter().map(|&(i, o, k)| i * o * k * k + o).sum();
    assert_eq!(expected, 393_891);
    let (_, p) =
        build_generator(GeneratorSpec::new(1, 3, 64, 16).with_depth(4), &mut rng(0)).unwrap();
    assert_eq!(p.count(), expected);
}

#[test]
fn generator_output_shape_and_range() {
    let (g, p) = build_generator(GeneratorSpec::new(1, 3, 64, 16), &mut rng(1)).unwrap();
    let y = g.apply(&p, &Tensor::zeros([1, 1, 64, 64])).unwrap();
    assert_eq!(y.shape(), [1, 3, 64, 64]);
    assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
    let (t, tp) = build_generator(GeneratorSpec::new(1, 1, 32, 8), &mut rng(1)).unwrap();
    assert_eq!(
        t.apply(&tp, &Tensor::full([2, 1, 32, 32], 0.5))
            .unwrap()
            .shape(),
        [2, 1, 32, 32]
    );
}

#[test]
fn builds_are_deterministic() {
    let spec = GeneratorSpec::new(1, 3, 32, 8);
    let (_, a) = build_generator(spec, &mut rng(7)).unwrap();
    let (_, b) = build_generator(spec, &mut rng(7)).unwrap();
    let (_, c) = build_generator(spec, &mut rng(8)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.digest(), b.digest());
    assert_ne!(a.digest(), c.digest());
    // Names depend on the architecture only.
    assert_eq!(a.names(), c.names());
}

#[test]
fn patch_map_size_follows_stride_arithmetic() {
    let spec = DiscriminatorSpec::for_image(3, 64, 8);
    assert_eq!(spec.n_layers, 3);
    // out = (in + 2 * pad - kernel) / stride + 1 with kernel 4, pad 1.
    let conv = |side: usize, stride: usize| (side + 2 - 4) / stride + 1;
    let mut side = 64;
    for _ in 0..3 {
        side = conv(side, 2);
    }
    side = conv(conv(side, 1), 1);
    assert_eq!(side, 6);
    let (d, p) = build_discriminator(spec, &mut rng(2)).unwrap();
    let map = d
        .apply(&p, &uniform(&mut rng(3), [2, 3, 64, 64], 0.0, 1.0))
        .unwrap();
    assert_eq!(map.scores().shape(), [2, 1, 6, 6]);
}

#[test]
fn layer_count_depends_on_image_size() {
    assert_eq!(DiscriminatorSpec::for_image(1, 32, 8).n_layers, 2);
    assert_eq!(DiscriminatorSpec::for_image(1, 16, 8).n_layers, 1);
    assert_eq!(DiscriminatorSpec::for_image(1, 256, 8).n_layers, 3);
}

#[test]
fn channel_mismatch_is_rejected() {
    let (d, p) = build_discriminator(DiscriminatorSpec::for_image(1, 32, 4), &mut rng(0)).unwrap();
    assert!(d.apply(&p, &Tensor::zeros([1, 3, 32, 32])).is_err());
    let (g, gp) = build_generator(GeneratorSpec::new(1, 3, 32, 4), &mut rng(0)).unwrap();
    assert!(g.apply(&gp, &Tensor::zeros([1, 3, 32, 32])).is_err());
    assert!(g.apply(&gp, &Tensor::zeros([1, 1, 30, 30])).is_err());
}

#[test]
fn zero_parameters_give_constant_patch_scores() {
    let (d, p) = build_discriminator(DiscriminatorSpec::for_image(3, 32, 4), &mut rng(0)).unwrap();
    let zero = Params::zeros(d.layout());
    assert_eq!(zero.names(), p.names());
    let map = d
        .apply(&zero, &uniform(&mut rng(1), [2, 3, 32, 32], 0.0, 1.0))
        .unwrap();
    assert!(map.scores().data().iter().all(|&v| v == 0.0));
}

#[test]
fn batched_forward_equals_stacked_single_forwards() {
    let (g, p) = build_generator(GeneratorSpec::new(1, 3, 32, 8), &mut rng(4)).unwrap();
    let x = uniform(&mut rng(5), [3, 1, 32, 32], 0.0, 1.0);
    let batched = g.apply(&p, &x).unwrap();
    let singles: Vec<Tensor> = (0..3)
        .map(|n| g.apply(&p, &x.sample_tensor(n)).unwrap())
        .collect();
    let stacked = Tensor::stack(&singles.iter().collect::<Vec<_>>()).unwrap();
    let worst = batched
        .data()
        .iter()
        .zip(stacked.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn init_statistics() {
    let g = Generator::new(GeneratorSpec::new(1, 3, 64, 16)).unwrap();
    let p = g.init_params(&mut rng(6));
    let mut weights = Vec::new();
    for (spec, t) in g.layout().iter().zip(p.tensors()) {
        match spec.kind {
            ParamKind::Weight => weights.extend_from_slice(t.data()),
            ParamKind::Bias => assert!(t.data().iter().all(|&v| v == 0.0), "{}", spec.name),
        }
    }
    assert!(weights.len() >= 10_000);
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let std = (weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((std - 0.02).abs() <= 0.002, "{std}");
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(Generator::new(GeneratorSpec::new(1, 3, 24, 8)).is_err());
    assert!(Generator::new(GeneratorSpec::new(1, 3, 32, 8).with_depth(6)).is_err());
    assert!(Generator::new(GeneratorSpec::new(1, 0, 32, 8)).is_err());
}

#[test]
fn bundle_paths_have_expected_shapes() {
    let b = ModelBundle::init(
        BundleSpec {
            image_size: 16,
            base_channels: 4,
        },
        &mut rng(9),
    )
    .unwrap();
    let x = uniform(&mut rng(10), [2, 1, 16, 16], 0.0, 1.0);
    for path in InferencePath::ALL {
        let y = b.run_path(path, &x).unwrap();
        let c = if matches!(path, InferencePath::N2G | InferencePath::G2N) {
            1
        } else {
            3
        };
        assert_eq!(y.shape(), [2, c, 16, 16], "{path}");
    }
    // N2G2C is the grayscale colorizer applied to the translated image.
    let g = b.run_path(InferencePath::N2G, &x).unwrap();
    assert_eq!(
        b.run_path(InferencePath::N2G2C, &x).unwrap(),
        b.run_path(InferencePath::G2C, &g).unwrap()
    );
    assert_eq!(NetId::ALL.len(), b.all_params().len());
}
