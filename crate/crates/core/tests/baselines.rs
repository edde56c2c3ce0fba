use productae::baselines::{
    construct, kronecker, polar_transform, random_puncture, reverse_axes, EncodeOrder, Gf2Matrix, LinearCode,
    MlDecoder, PolarSpec, ProductCode,
};
use productae::codec::MessageBatch;
use productae::rng::substream;
use rand::Rng;

fn product(a: LinearCode, b: LinearCode) -> ProductCode {
    ProductCode::new(vec![a, b]).unwrap()
}

/// `u * (G1 ⊗ G2)` with the message and codeword read column-major.
fn kron_oracle(code: &ProductCode, u: &[u8]) -> Vec<u8> {
    let [c1, c2] = code.components() else { unreachable!() };
    let g = kronecker(c1.generator(), c2.generator());
    let u_kron = reverse_axes(u, &[c2.k(), c1.k()]);
    let x = g.mul_vec(&u_kron).unwrap();
    reverse_axes(&x, &[c1.n(), c2.n()])
}

#[test]
fn three_two_parity_squared_matches_kronecker() {
    let spc = LinearCode::single_parity_check(3).unwrap();
    let code = product(spc.clone(), spc);
    let all = MessageBatch::all(4);
    for r in 0..all.rows() {
        let u = all.row(r);
        assert_eq!(code.encode(u).unwrap(), kron_oracle(&code, u), "message {u:?}");
    }
    // (1,0,1,1): rows (1,0) and (1,1) get parities 1 and 0; the column parities follow.
    let x = code.encode_2d(&[1, 0, 1, 1], EncodeOrder::RowsFirst).unwrap();
    assert_eq!(x, Gf2Matrix::from_rows(&[&[1, 0, 1], &[1, 1, 0], &[0, 1, 1]]).unwrap());
}

#[test]
fn generic_product_matches_reversed_kronecker() {
    // Three heterogeneous components: the axis-wise encoder against G_3 ⊗ G_2 ⊗ G_1.
    let comps = vec![
        LinearCode::single_parity_check(3).unwrap(),
        LinearCode::repetition(2).unwrap(),
        LinearCode::single_parity_check(4).unwrap(),
    ];
    let code = ProductCode::new(comps.clone()).unwrap();
    let g_rev = comps[2]
        .generator()
        .kronecker(comps[1].generator())
        .kronecker(comps[0].generator());
    let all = MessageBatch::all(code.k());
    for r in 0..all.rows() {
        assert_eq!(code.encode(all.row(r)).unwrap(), g_rev.mul_vec(all.row(r)).unwrap());
    }
    let p = code.params();
    assert_eq!((p.n, p.k, p.d), (24, 6, Some(2 * 2 * 2)));
    assert!((p.rate - 0.25).abs() < 1e-15);
}

#[test]
fn encode_order_does_not_matter() {
    let code = product(LinearCode::hamming74(), LinearCode::hamming74());
    let mut rng = substream(1, "msgs", 0);
    for _ in 0..1000 {
        let u: Vec<u8> = (0..16).map(|_| rng.random_range(0..2u8)).collect();
        let a = code.encode_2d(&u, EncodeOrder::RowsFirst).unwrap();
        let b = code.encode_2d(&u, EncodeOrder::ColumnsFirst).unwrap();
        assert_eq!(a, b);
        let flat: Vec<u8> = (0..7).flat_map(|r| a.row(r).to_vec()).collect();
        assert_eq!(flat, code.encode(&u).unwrap());
    }
}

#[test]
fn product_parameters() {
    let h = product(LinearCode::hamming74(), LinearCode::hamming74()).params();
    assert_eq!((h.n, h.k, h.d), (49, 16, Some(9)));

    // (15,10) x (20,10) with generic full-rank components.
    let sys = |n: usize, k: usize| {
        let mut g = Gf2Matrix::zeros(k, n);
        for i in 0..k {
            g.set(i, i, 1);
            g.set(i, k + (i % (n - k)), 1);
        }
        LinearCode::new(g).unwrap()
    };
    let big = product(sys(15, 10), sys(20, 10)).params();
    assert_eq!((big.n, big.k, big.d), (300, 100, None));
}

fn rm_like_spec(n: usize, k: usize) -> PolarSpec {
    construct(n, k, 1.0, 20_000, 3).unwrap()
}

#[test]
fn polar_noiseless_round_trip() {
    for (n, k) in [(8, 4), (16, 8), (12, 6)] {
        let spec = rm_like_spec(n, k);
        let all = MessageBatch::all(k);
        for r in 0..all.rows() {
            let x = spec.encode(all.row(r)).unwrap();
            let llrs = spec.channel_llrs(&x, 0.5).unwrap();
            assert_eq!(spec.sc_decode(&llrs).unwrap(), all.row(r), "({n},{k}) message {r}");
        }
    }
}

#[test]
fn butterfly_matches_generator_matrix() {
    let f = Gf2Matrix::from_rows(&[&[1, 0], &[1, 1]]).unwrap();
    let g = f.kronecker(&f).kronecker(&f);
    let spec = PolarSpec::new(8, 4, vec![3, 5, 6, 7], vec![]).unwrap();
    for m in 0..16u8 {
        let info: Vec<u8> = (0..4).map(|b| (m >> (3 - b)) & 1).collect();
        let mut u = vec![0u8; 8];
        for (&pos, &b) in spec.info_set.iter().zip(&info) {
            u[pos] = b;
        }
        assert_eq!(spec.encode_bits(&info).unwrap(), g.mul_vec(&u).unwrap());
    }
    let mut all_info: Vec<u8> = vec![1, 0, 1, 1, 0, 0, 1, 0];
    let orig = all_info.clone();
    polar_transform(&mut all_info);
    polar_transform(&mut all_info);
    assert_eq!(all_info, orig);
}

#[test]
fn construction_matches_bhattacharyya_order() {
    // Bhattacharyya recursion z- = 2z - z^2, z+ = z^2 from a BEC-like start.
    let mut z = vec![0.5f64];
    while z.len() < 8 {
        let mut next = vec![0.0; 2 * z.len()];
        let h = z.len();
        for (i, &v) in z.iter().enumerate() {
            next[i] = 2.0 * v - v * v;
            next[i + h] = v * v;
        }
        // Natural order: bit i of the index selects the upgraded branch at each level.
        z = (0..2 * h)
            .map(|i| if i % 2 == 0 { next[i / 2] } else { next[h + i / 2] })
            .collect();
    }
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    let mut oracle = order[..4].to_vec();
    oracle.sort_unstable();
    assert_eq!(oracle, vec![3, 5, 6, 7]);

    let spec = construct(8, 4, 3.0, 100_000, 11).unwrap();
    assert_eq!(spec.info_set, oracle);
    assert!(spec.construction.as_ref().unwrap().warning().is_none());
    assert_eq!(
        construct(8, 4, 3.0, 1000, 5).unwrap(),
        construct(8, 4, 3.0, 1000, 5).unwrap()
    );
}

#[test]
fn zero_trial_construction_warns() {
    let spec = construct(8, 4, 3.0, 0, 1).unwrap();
    assert!(spec.construction.unwrap().warning().is_some());
}

#[test]
fn punctured_positions_have_zero_llr() {
    let spec = construct(225, 100, 2.0, 200, 4).unwrap();
    assert_eq!(spec.mother_len, 256);
    assert_eq!(spec.punctured.len(), 31);
    let y = vec![0.7; 225];
    let llrs = spec.channel_llrs(&y, 1.0).unwrap();
    for p in &spec.punctured {
        assert_eq!(llrs[*p], 0.0);
    }
    assert_eq!(llrs.iter().filter(|&&l| l == 0.0).count(), 31);
}

#[test]
fn puncture_seeds_differ() {
    let patterns: Vec<Vec<usize>> = (0..100).map(|s| random_puncture(256, 225, s).unwrap()).collect();
    for i in 0..patterns.len() {
        for j in i + 1..patterns.len() {
            assert_ne!(patterns[i], patterns[j], "seeds {i} and {j}");
        }
    }
}

#[test]
fn ml_never_loses_to_sc_on_the_same_noise() {
    let spec = PolarSpec::new(8, 4, vec![3, 5, 6, 7], vec![]).unwrap();
    let ml = MlDecoder::new(4, |u| spec.encode(u)).unwrap();
    let sigma = productae::channel::snr_db_to_sigma(4.0);
    let mut rng = substream(8, "paired", 0);
    let (mut sc_err, mut ml_err) = (0usize, 0usize);
    let mut ml_dist_ok = true;
    for _ in 0..5000 {
        let u: Vec<u8> = (0..4).map(|_| rng.random_range(0..2u8)).collect();
        let y: Vec<f64> = spec
            .encode(&u)
            .unwrap()
            .iter()
            .map(|x| x + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let sc = spec.sc_decode(&spec.channel_llrs(&y, sigma).unwrap()).unwrap();
        let m = ml.decode(&y).unwrap();
        sc_err += sc.iter().zip(&u).filter(|(a, b)| a != b).count();
        ml_err += m.iter().zip(&u).filter(|(a, b)| a != b).count();
        // ML is nearest-codeword; SC's answer can never be strictly closer.
        let dist = |bits: &[u8]| -> f64 {
            spec.encode(bits)
                .unwrap()
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        ml_dist_ok &= dist(&m) <= dist(&sc) + 1e-12;
    }
    assert!(ml_dist_ok);
    assert!(ml_err <= sc_err + 3 * ((sc_err as f64).sqrt() as usize + 1));
}
