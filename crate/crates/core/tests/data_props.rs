use proptest::prelude::*;
use trass::blocks::enumerate_pairs;
use trass::data::{
    collect_reverse, collect_transitions, decode_relative, encode_absolute, encode_relative, read_dataset,
    write_dataset, DatasetHeader, ReverseTrajectory, Transition, REVERSE_FORMAT, TRANSITIONS_FORMAT,
};
use trass::geometry::{ang_dist, Pose2};
use trass::rng::seeded;
use trass::sim::{is_success, sample_initial_state, SimConfig};
use trass::WorldState;

fn pose() -> impl Strategy<Value = Pose2> {
    (-0.3..0.3f64, -0.3..0.3f64, -4.0..4.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
}

proptest! {
    #[test]
    fn relative_encoding_round_trips_and_is_rigid_invariant(f in pose(), m in pose(), r in pose()) {
        let s = WorldState { pair_id: "x".into(), female_pose: f, male_pose: m };
        let e = encode_relative(&s);
        prop_assert!((e[2] * e[2] + e[3] * e[3] - 1.0).abs() < 1e-9);
        let d = decode_relative(&e).unwrap();
        let rel = s.relative();
        prop_assert!((d.x - rel.x).abs() < 1e-9 && (d.y - rel.y).abs() < 1e-9 && ang_dist(d.theta, rel.theta) < 1e-9);
        let moved = encode_relative(&s.moved_by(&r));
        for (a, b) in e.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let abs = encode_absolute(&s);
        prop_assert!((abs[2].hypot(abs[3]) - 1.0).abs() < 1e-9 && (abs[6].hypot(abs[7]) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn reverse_file_is_deterministic_and_round_trips() {
    let pairs = enumerate_pairs(3).unwrap();
    let cfg = SimConfig::default();
    let write = || {
        let t = collect_reverse(&pairs, 30, 12, 9, &cfg).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &DatasetHeader::reverse(9, t.len(), 12, &cfg), &t).unwrap();
        (t, buf)
    };
    let (t, a) = write();
    let (_, b) = write();
    assert_eq!(a, b);
    let (h, back): (_, Vec<ReverseTrajectory>) = read_dataset(a.as_slice(), REVERSE_FORMAT).unwrap();
    assert_eq!(h.count, 30);
    assert_eq!(back, t);
    for r in &t {
        assert_eq!(r.states.len(), 13);
        let pair = pairs.iter().find(|p| p.id == r.pair_id).unwrap();
        assert!(is_success(r.goal(), pair, &cfg));
    }
}

#[test]
fn transition_file_round_trips() {
    let pairs = enumerate_pairs(3).unwrap();
    let cfg = SimConfig::default();
    let t = collect_transitions(&pairs, 95, 4, &cfg).unwrap();
    assert_eq!(t.len(), 95);
    assert!(t.iter().all(|r| r.action.in_bounds()));
    let mut buf = Vec::new();
    write_dataset(&mut buf, &DatasetHeader::transitions(4, t.len(), &cfg), &t).unwrap();
    let (_, back): (_, Vec<Transition>) = read_dataset(buf.as_slice(), TRANSITIONS_FORMAT).unwrap();
    assert_eq!(back, t);
    assert!(read_dataset::<_, Transition>(buf.as_slice(), REVERSE_FORMAT).is_err());
}

#[test]
fn reverse_starts_resemble_initial_states() {
    let pairs = enumerate_pairs(3).unwrap();
    let cfg = SimConfig::default();
    let trajs = collect_reverse(&pairs, 300, 12, 2, &cfg).unwrap();
    let starts = trajs.iter().map(|t| t.start().separation()).sum::<f64>() / trajs.len() as f64;
    let mut rng = seeded(3);
    let init = (0..300)
        .map(|i| sample_initial_state(&pairs[i % pairs.len()], &mut rng, 0.0, &cfg).unwrap().separation())
        .sum::<f64>()
        / 300.0;
    let ratio = starts / init;
    assert!((0.5..=2.0).contains(&ratio), "start {starts} vs initial {init}");
}
