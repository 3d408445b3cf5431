use proptest::prelude::{prop_assert, prop_assert_eq, proptest, Strategy as _};

use super::*;
use crate::codec::{encode_media, gop_layout, GopConfig};

fn store(n: usize, gop: GopConfig) -> MediaStore<std::io::Cursor<Vec<u8>>> {
    let frames: Vec<Frame> = (0..n)
        .map(|i| {
            let mut f = Frame::filled(8, 6, (i % 7) as u8);
            let len = f.pixels.len();
            f.pixels[(i * 5) % len] = 255;
            f
        })
        .collect();
    MediaStore::from_bytes(encode_media(&frames, &gop, 20.0).unwrap()).unwrap()
}

fn fixed_kf(interval: u64) -> impl Fn(u64) -> u64 {
    move |i| i / interval * interval
}

#[test]
fn worked_counts() {
    let plan: Vec<u64> = (0..10).collect();
    let kf = fixed_kf(30);
    assert_eq!(simulate(&plan, &kf, Strategy::PerFrame).frames_decoded, 55);
    assert_eq!(simulate(&plan, &kf, Strategy::AdaptiveBatch).frames_decoded, 10);
    assert_eq!(simulate(&plan, &kf, Strategy::AdaptiveBatch).seeks, 1);
    let plan = [0, 300];
    assert_eq!(simulate(&plan, &kf, Strategy::AdaptiveBatch), SimCounts { frames_decoded: 2, seeks: 2 });
    assert_eq!(simulate(&plan, &kf, Strategy::NaiveBatch).frames_decoded, 301);
}

#[test]
fn keyframe_hits_and_continuation() {
    let kf = fixed_kf(30);
    let c = simulate(&[0, 30, 60], &kf, Strategy::AdaptiveBatch);
    assert_eq!(c, SimCounts { frames_decoded: 3, seeks: 3 });
    let runs: Vec<Run> = schedule(&[29, 30], &kf, Strategy::AdaptiveBatch).collect();
    assert_eq!(
        runs,
        [
            Run { seek: true, from: 0, to: 29 },
            Run { seek: false, from: 30, to: 30 }
        ]
    );
}

#[test]
fn fetch_matches_decode_frame_and_schedule() {
    for gop in [GopConfig::fixed(30), GopConfig::Variable { seed: 3, min_frames: 5, max_frames: 40 }] {
        let mut s = store(200, gop);
        let table = KeyframeTable::new(s.keyframes(), s.frame_count());
        let plan = [0, 3, 29, 30, 31, 77, 150, 199];
        let expected: Vec<Frame> = plan
            .iter()
            .map(|&i| s.decode_frame(i, &mut ByteCounter::default()).unwrap())
            .collect();
        for strategy in Strategy::ALL {
            let (frames, stats) = fetch_frames(&plan, &mut s, strategy).unwrap();
            assert_eq!(frames, expected, "{strategy}");
            let sim = simulate(&plan, |i| table.keyframe_before(i), strategy);
            assert_eq!(stats.frames_decoded, sim.frames_decoded, "{strategy}");
            assert_eq!(stats.seeks, sim.seeks, "{strategy}");
            assert_eq!(stats.images, plan.len() as u64);
        }
    }
}

#[test]
fn fetch_is_deterministic_and_validates() {
    let mut s = store(50, GopConfig::fixed(10));
    let a = fetch_frames(&[1, 12, 40], &mut s, Strategy::AdaptiveBatch).unwrap().1;
    let b = fetch_frames(&[1, 12, 40], &mut s, Strategy::AdaptiveBatch).unwrap().1;
    assert_eq!((a.bytes_read, a.frames_decoded), (b.bytes_read, b.frames_decoded));
    assert!(matches!(
        fetch_frames(&[3, 3], &mut s, Strategy::PerFrame),
        Err(DecodeError::InvalidPlan(_))
    ));
    assert!(matches!(
        fetch_frames(&[50], &mut s, Strategy::PerFrame),
        Err(DecodeError::Codec(CodecError::FrameOutOfRange { index: 50, .. }))
    ));
    let (frames, stats) = fetch_frames(&[], &mut s, Strategy::NaiveBatch).unwrap();
    assert!(frames.is_empty());
    assert_eq!(stats.bytes_read, 0);
}

#[test]
fn keyframe_table_matches_layout() {
    let gop = GopConfig::Variable { seed: 9, min_frames: 3, max_frames: 11 };
    let kfs = gop_layout(&gop, 100);
    let table = KeyframeTable::new(&kfs, 100);
    for i in 0..100 {
        assert_eq!(table.keyframe_before(i), crate::codec::keyframe_before(&kfs, i));
    }
}

#[test]
fn strategy_names() {
    assert_eq!(parse_strategies("all").unwrap(), Strategy::ALL);
    assert_eq!(
        parse_strategies("adaptive,per_frame").unwrap(),
        [Strategy::AdaptiveBatch, Strategy::PerFrame]
    );
    assert!(parse_strategies("fast").is_err());
}

fn arb_plan(n: u64) -> impl proptest::strategy::Strategy<Value = Vec<u64>> {
    proptest::collection::btree_set(0..n, 0..12).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #[test]
    fn adaptive_dominates(plan in arb_plan(400), interval in 1u64..60) {
        let kf = fixed_kf(interval);
        let a = simulate(&plan, &kf, Strategy::AdaptiveBatch);
        let p = simulate(&plan, &kf, Strategy::PerFrame);
        let n = simulate(&plan, &kf, Strategy::NaiveBatch);
        prop_assert!(a.frames_decoded <= p.frames_decoded);
        prop_assert!(a.frames_decoded <= n.frames_decoded);
        if plan.windows(2).all(|w| w[1] == w[0] + 1) {
            prop_assert_eq!(a.frames_decoded, n.frames_decoded);
        }
        // Every decoded frame lies in some [kf(t), t], and none twice.
        let mut decoded = std::collections::BTreeSet::new();
        for r in schedule(&plan, &kf, Strategy::AdaptiveBatch) {
            for i in r.from..=r.to {
                prop_assert!(decoded.insert(i));
                prop_assert!(plan.iter().any(|&t| kf(t) <= i && i <= t));
            }
        }
    }
}
