use proptest::prelude::*;

use super::*;
use crate::events::{KeyboardEvent, MouseEvent, Timestamp};

fn mv(ms: u64, dx: i32, dy: i32) -> Event {
    Event::Mouse(MouseEvent::movement(Timestamp::from_ms(ms), dx, dy))
}

fn key(ms: u64, vk: u8, action: KeyAction) -> Event {
    Event::Keyboard(KeyboardEvent {
        t: Timestamp::from_ms(ms),
        vk,
        action,
    })
}

fn binned(dx: &[i64]) -> BinnedActions {
    BinnedActions {
        bin_ms: 50,
        bins: dx
            .iter()
            .map(|&d| Bin {
                dx: d,
                dy: -d,
                ..Bin::default()
            })
            .collect(),
    }
}

#[test]
fn bins_sum_motion() {
    let ep = Episode::with_events("m", vec![mv(0, 3, 0), mv(20, -1, 0), mv(60, 5, 2)]);
    let b = bin_actions(&ep, 50);
    assert_eq!(b.n(), 2);
    assert_eq!((b.bins[0].dx, b.bins[0].dy), (2, 0));
    assert_eq!((b.bins[1].dx, b.bins[1].dy), (5, 2));
    assert_eq!(bin_actions(&Episode::new("e"), 50).n(), 0);
}

#[test]
fn held_key_spans_bins() {
    let ep = Episode::with_events(
        "k",
        vec![key(10, 32, KeyAction::Press), key(120, 32, KeyAction::Release), mv(230, 0, 0)],
    );
    let b = bin_actions(&ep, 50);
    let with: Vec<bool> = b.bins.iter().map(|x| x.keys.contains(&32)).collect();
    assert_eq!(with, [true, true, true, false, false]);
}

#[test]
fn held_button_spans_bins() {
    let down = Event::Mouse(MouseEvent {
        button_flags: mouse_flags::LEFT_DOWN,
        ..MouseEvent::movement(Timestamp::from_ms(0), 0, 0)
    });
    let up = Event::Mouse(MouseEvent {
        button_flags: mouse_flags::LEFT_UP,
        ..MouseEvent::movement(Timestamp::from_ms(160), 0, 0)
    });
    let b = bin_actions(&Episode::with_events("b", vec![down, up, mv(210, 0, 0)]), 50);
    let held: Vec<u8> = b.bins.iter().map(|x| x.buttons).collect();
    assert_eq!(held, [1, 1, 1, 1, 0]);
}

#[test]
fn pearson_values() {
    let a = [1.0, 2.0, 3.0];
    assert!((pearson(&a, &a).unwrap().value - 1.0).abs() < 1e-12);
    let neg: Vec<f64> = a.iter().map(|v| -v).collect();
    assert!((pearson(&a, &neg).unwrap().value + 1.0).abs() < 1e-12);
    let r = pearson(&a, &[2.0, 4.0, 7.0]).unwrap();
    assert!((r.value - 0.99340).abs() < 1e-4, "{}", r.value);
    let flat = pearson(&a, &[5.0, 5.0, 5.0]).unwrap();
    assert!(flat.undefined);
    assert_eq!(flat.value, 0.0);
    assert!(matches!(
        pearson(&a, &[1.0]),
        Err(MetricsError::LengthMismatch { left: 3, right: 1 })
    ));
}

#[test]
fn scale_ratio_values() {
    let src = binned(&[4, -4, 4, -4]);
    assert_eq!(scale_ratio(&src, &src).unwrap(), (1.0, 1.0));
    let pred = binned(&[8, -8, 8, 8]);
    assert_eq!(scale_ratio(&src, &pred).unwrap(), (2.0, 2.0));
    let zero = binned(&[0, 0, 0, 0]);
    assert_eq!(scale_ratio(&src, &zero).unwrap().0, f64::INFINITY);
    assert_eq!(scale_ratio(&zero, &zero).unwrap(), (1.0, 1.0));
    assert!(scale_ratio(&src, &binned(&[1])).is_err());
}

#[test]
fn keypress_counts() {
    let mk = |sets: &[&[u8]]| BinnedActions {
        bin_ms: 50,
        bins: sets
            .iter()
            .map(|s| Bin {
                keys: s.iter().copied().collect(),
                ..Bin::default()
            })
            .collect(),
    };
    let gt = mk(&[&[1], &[1, 2], &[], &[3], &[]]);
    let pred = mk(&[&[1], &[1, 2], &[], &[3], &[4]]);
    let (kbd, mouse) = keypress_accuracy(&gt, &pred).unwrap();
    assert_eq!((kbd.bins, kbd.matched), (4, 3));
    assert_eq!(kbd.percent, 75.0);
    assert!(mouse.vacuous);
    assert_eq!(mouse.percent, 100.0);
}

#[test]
fn evaluate_self_and_doubled() {
    let events: Vec<Event> = (0..40)
        .map(|i| mv(i * 25, (i % 7) as i32 - 3, (i % 5) as i32 - 1))
        .chain([key(100, 65, KeyAction::Press), key(400, 65, KeyAction::Release)])
        .collect();
    let ep = Episode::with_events("e", events).normalize().unwrap();
    let r = evaluate(&ep, &ep, 50);
    assert!((r.pearson_x.value - 1.0).abs() < 1e-12);
    assert!((r.pearson_y.value - 1.0).abs() < 1e-12);
    assert_eq!((r.scale_ratio_x, r.scale_ratio_y), (1.0, 1.0));
    assert_eq!((r.kbd.percent, r.mouse.percent), (100.0, 100.0));
    assert!(!r.kbd.vacuous && r.mouse.vacuous);

    let mut doubled = ep.clone();
    for e in &mut doubled.events {
        if let Event::Mouse(m) = e {
            m.dx *= 2;
            m.dy *= 2;
        }
    }
    let r = evaluate(&ep, &doubled, 50);
    assert!((r.pearson_x.value - 1.0).abs() < 1e-12);
    assert!((r.scale_ratio_x - 2.0).abs() < 1e-12);
    assert!((r.scale_ratio_y - 2.0).abs() < 1e-12);
    let text = r.to_string();
    assert!(text.contains("scale_ratio_x=2.0000"));
    assert!(text.lines().all(|l| l.contains('=')));
}

#[test]
fn evaluate_pads_shorter_episode() {
    let gt = Episode::with_events("g", vec![mv(0, 1, 1), mv(500, 2, 2)]);
    let pred = Episode::with_events("p", vec![mv(0, 1, 1)]);
    let r = evaluate(&gt, &pred, 50);
    assert_eq!(r.bins, 11);
}

proptest! {
    #[test]
    fn ratio_properties(v in proptest::collection::vec(-50i64..50, 1..60), k in prop_oneof![Just(0.5), Just(2.0), Just(3.0)], seed in any::<u64>()) {
        let s: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        prop_assume!(s.iter().any(|&x| x != 0.0));
        let scaled: Vec<f64> = s.iter().map(|x| x * k).collect();
        let r = magnitude_ratio(&scaled, &s).unwrap();
        prop_assert!((r - f64::max(k, 1.0 / k)).abs() < 1e-9);
        prop_assert!((magnitude_ratio(&s, &scaled).unwrap() - r).abs() < 1e-9);
        prop_assert!(r >= 1.0);
        // Permuting bins of either side leaves the ratio unchanged.
        let mut perm = scaled.clone();
        let mut state = seed;
        for i in (1..perm.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert!((magnitude_ratio(&perm, &s).unwrap() - r).abs() < 1e-9);
    }

    #[test]
    fn pearson_affine_invariance(v in proptest::collection::vec(-50i64..50, 3..40), w in proptest::collection::vec(-50i64..50, 3..40), a in 0.1f64..10.0, b in -100f64..100.0) {
        let n = v.len().min(w.len());
        let x: Vec<f64> = v[..n].iter().map(|&t| t as f64).collect();
        let y: Vec<f64> = w[..n].iter().map(|&t| t as f64).collect();
        let base = pearson(&x, &y).unwrap();
        let ty: Vec<f64> = y.iter().map(|t| a * t + b).collect();
        let moved = pearson(&x, &ty).unwrap();
        prop_assert_eq!(base.undefined, moved.undefined);
        prop_assert!((base.value - moved.value).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&base.value));
    }

    #[test]
    fn binning_conserves_displacement(moves in proptest::collection::vec((0u64..5000, -100i32..100, -100i32..100), 0..80)) {
        let events: Vec<Event> = moves.iter().map(|&(t, dx, dy)| mv(t, dx, dy)).collect();
        let ep = Episode::with_events("c", events).normalize().unwrap();
        let b = bin_actions(&ep, 50);
        let sx: i64 = b.bins.iter().map(|x| x.dx).sum();
        let sy: i64 = b.bins.iter().map(|x| x.dy).sum();
        prop_assert_eq!(sx, moves.iter().map(|m| m.1 as i64).sum::<i64>());
        prop_assert_eq!(sy, moves.iter().map(|m| m.2 as i64).sum::<i64>());
    }
}
