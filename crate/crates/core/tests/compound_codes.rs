use proptest::prelude::*;
use wiretap_core::channel::Dmc;
use wiretap_core::coins::{enumerate, Coins};
use wiretap_core::compound::{CompoundChannelCode, CompoundSpec, SideSets};
use wiretap_core::polar::{construct_index_sets, JointModel, PolarParams, ProfileMode, SourceSpec};

fn noiseless_spec(k: usize, multipliers: Vec<usize>, sets: Vec<SideSets>) -> CompoundSpec {
    let model = JointModel::u_given_y(&SourceSpec::uniform(), &Dmc::noiseless());
    let models = vec![model; multipliers.len()];
    CompoundSpec::new(k, multipliers, sets, models).unwrap()
}

fn side_sets(k: usize) -> impl Strategy<Value = SideSets> {
    (proptest::collection::vec(any::<bool>(), k), proptest::collection::vec(any::<bool>(), k)).prop_map(move |(h, v)| {
        let hs: Vec<usize> = (0..k).filter(|&i| h[i]).collect();
        let vs: Vec<usize> = (0..k).filter(|&i| h[i] && v[i]).collect();
        SideSets::new(vs, hs)
    })
}

fn spec_and_input() -> impl Strategy<Value = (CompoundSpec, Vec<u8>)> {
    (prop_oneof![Just(2usize), Just(4), Just(8)], 1usize..=3)
        .prop_flat_map(|(k, j)| {
            let mults = proptest::collection::vec(1usize..=3, j - 1);
            let sets = proptest::collection::vec(side_sets(k), j);
            (Just(k), mults, sets)
        })
        .prop_flat_map(|(k, rest, sets)| {
            let mut mults = vec![1];
            mults.extend(rest);
            let spec = noiseless_spec(k, mults, sets);
            let len = spec.input_len();
            (Just(spec), proptest::collection::vec(0u8..=1, len))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_decoder_recovers_the_input((spec, u) in spec_and_input()) {
        let code = spec.css_encode(&u).unwrap();
        prop_assert_eq!(code.e.len(), spec.e_len());
        for (j, r) in code.residues.iter().enumerate() {
            prop_assert_eq!(r.len(), spec.residue_len(j + 1));
        }
        for j in 1..=spec.j() {
            prop_assert_eq!(&spec.css_decode(j, &u, &code).unwrap(), &u);
        }
    }
}

#[test]
fn padded_output_is_uniform_on_its_range() {
    for mults in [vec![1], vec![1, 2]] {
        let j = mults.len();
        let sets = vec![SideSets::new(vec![0, 1], vec![0, 1, 2]), SideSets::new(vec![1, 3], vec![1, 2, 3])];
        let spec = noiseless_spec(4, mults, sets[..j].to_vec());
        let leaves = enumerate(
            |c| {
                let u = c.uniform_bits(spec.input_len());
                let code = spec.css_encode(&u).unwrap();
                let res = code.residue_bits();
                let pad = c.uniform_bits(res.len());
                let padded: Vec<u8> = res.iter().zip(&pad).map(|(a, b)| a ^ b).collect();
                (code.e, padded)
            },
            1 << 20,
        )
        .unwrap();
        let mut law = std::collections::HashMap::new();
        for (o, p) in leaves {
            *law.entry(o).or_insert(0.0) += p;
        }
        let first = *law.values().next().unwrap();
        assert!(law.values().all(|&p| (p - first).abs() < 1e-12), "J = {j}");
        assert!(((first * law.len() as f64) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn residue_share_shrinks_with_block_length() {
    let source = SourceSpec::uniform();
    let channels = [Dmc::bec(0.2), Dmc::bec(0.4)];
    let mut last = f64::INFINITY;
    for k in [256, 1024, 4096] {
        let params = PolarParams::new(k, 0.3).unwrap();
        let mode = ProfileMode::MonteCarlo { samples: 2000, seed: 11 };
        let (sets, models): (Vec<_>, Vec<_>) = channels
            .iter()
            .map(|ch| {
                let (s, _) = construct_index_sets(&source, ch, &params, mode, None).unwrap();
                (SideSets::new(s.v_u_y, s.h_u_y), JointModel::u_given_y(&source, ch))
            })
            .unzip();
        let spec = CompoundSpec::new(k, vec![1, 2], sets, models).unwrap();
        let share = spec.residue_total() as f64 / spec.input_len() as f64;
        assert!(share < last, "K = {k}: {share} >= {last}");
        last = share;
    }
}

#[test]
fn embedding_sets_cover_the_chained_output() {
    let params = PolarParams::new(64, 0.3).unwrap();
    let mode = ProfileMode::MonteCarlo { samples: 2000, seed: 3 };
    let code = CompoundChannelCode::construct(&[Dmc::bsc(0.05), Dmc::bec(0.15)], vec![1, 2], 0.5, &params, mode, 0.25, None).unwrap();
    let total: usize = code.embed_sets().iter().map(Vec::len).sum();
    assert_eq!(total, code.spec().e_len());
}
