use mf2_tensor::Tensor;
use mossformer2::params::{ParamBuilder, ParamStore};
use mossformer2::recurrent::{ConvU, GcuLayer, RecurrentConfig, RecurrentModule, Toggles};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn build<M>(seed: u64, f: impl FnOnce(&mut ParamBuilder<'_, f64>) -> M) -> (M, ParamStore<f64>) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = f(&mut ParamBuilder::new(&mut store, &mut rng));
    (m, store)
}

fn random(seed: u64, shape: &[usize]) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), shape).unwrap()
}

fn cfg(dim: usize, bottleneck_dim: usize) -> RecurrentConfig {
    RecurrentConfig { dim, bottleneck_dim, memory_blocks: 2, memory_kernel: 5, groups: bottleneck_dim, toggles: Toggles::default() }
}

#[test]
fn bottleneck_maps_to_normalized_inner_width() {
    let (m, _) = build(0, |pb| RecurrentModule::<f64>::new(pb, &cfg(64, 32)));
    let b = m.bottleneck.as_ref().unwrap();
    let y = b.forward(&random(1, &[20, 64])).unwrap();
    assert_eq!(y.shape(), [20, 32]);
    // default affine is (1, 0), so rows are standardized
    for row in y.to_vec().chunks(32) {
        let mean = row.iter().sum::<f64>() / 32.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 32.0;
        assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-3, "mean {mean} var {var}");
    }
}

#[test]
fn conv_u_sees_one_neighbour_each_side() {
    let (c, _) = build(2, |pb| ConvU::<f64>::new(pb, 6));
    let (s, d, t) = (15, 6, 7);
    let x = random(3, &[s, d]).with_grad();
    c.forward(&x).unwrap().narrow(0, t, 1).unwrap().sum().backward().unwrap();
    let g = x.grad().unwrap();
    let touched: Vec<usize> = (0..s).filter(|&i| g[i * d..(i + 1) * d].iter().any(|v| *v != 0.0)).collect();
    assert_eq!(touched, vec![t - 1, t, t + 1]);
}

#[test]
fn conv_u_preserves_shape() {
    let (c, _) = build(4, |pb| ConvU::<f64>::new(pb, 5));
    for s in [1, 2, 9] {
        assert_eq!(c.forward(&random(s as u64, &[s, 5])).unwrap().shape(), [s, 5]);
    }
}

#[test]
fn gradients_reach_both_gate_branches() {
    let (g, store) = build(5, |pb| GcuLayer::<f64>::new(pb, &cfg(16, 8)));
    let x = random(6, &[12, 8]);
    let y = g.forward(&x).unwrap();
    assert_eq!(y.shape(), [12, 8]);
    y.mul(&random(7, &[12, 8])).unwrap().sum().backward().unwrap();
    for prefix in ["u.", "v.", "fsmn."] {
        let mut any = false;
        for (name, t) in store.iter().filter(|(n, _)| n.starts_with(prefix)) {
            let nz = t.grad().is_some_and(|g| g.iter().any(|v| *v != 0.0));
            assert!(nz, "{name} got no gradient");
            any |= nz;
        }
        assert!(any, "no gradient under {prefix}");
    }
}

#[test]
fn module_preserves_width_for_every_toggle() {
    for bits in 0..32u32 {
        let toggles = Toggles {
            dilation: bits & 1 != 0,
            dense: bits & 2 != 0,
            gate: bits & 4 != 0,
            conv_u: bits & 8 != 0,
            bottleneck: bits & 16 != 0,
        };
        let c = RecurrentConfig { toggles, groups: 4, ..cfg(16, 8) };
        let (m, store) = build(bits as u64, |pb| RecurrentModule::<f64>::new(pb, &c));
        assert_eq!(store.numel(), RecurrentModule::<f64>::param_count(&c));
        assert_eq!(m.forward(&random(9, &[11, 16])).unwrap().shape(), [11, 16]);
    }
}
