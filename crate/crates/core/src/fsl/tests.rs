use proptest::prelude::*;

use super::*;
use crate::container::MediaRef;
use crate::events::{KeyAction, KeyboardEvent, MouseEvent, ScreenEvent, Timestamp};

fn screen(ms: u64, frame: u64) -> Event {
    Event::Screen(ScreenEvent {
        t: Timestamp::from_ms(ms),
        media: MediaRef::external("a.gops"),
        frame_index: frame,
    })
}

fn key(ms: u64) -> Event {
    Event::Keyboard(KeyboardEvent {
        t: Timestamp::from_ms(ms),
        vk: 65,
        action: KeyAction::Press,
    })
}

fn ep(events: Vec<Event>) -> Episode {
    Episode::with_events("ep", events)
}

#[test]
fn nep_tau_examples() {
    let e = ep(vec![screen(0, 0), key(10), screen(50, 1), screen(100, 2)]);
    assert_eq!(nep_tau_order(&e, 0), [0, 1, 2, 3]);
    assert_eq!(nep_tau_order(&e, 1), [0, 2, 1, 3]);
    let e = ep(vec![screen(0, 0), key(10), screen(50, 1)]);
    assert_eq!(nep_tau_order(&e, 5), [0, 2, 1]);
}

#[test]
fn nep_tau_leading_actions() {
    let e = ep(vec![key(0), screen(10, 0), key(20), screen(50, 1)]);
    assert_eq!(nep_tau_order(&e, 0), [0, 1, 2, 3]);
    assert_eq!(nep_tau_order(&e, 1), [1, 0, 3, 2]);
    assert_eq!(nep_tau_order(&e, 2), [1, 3, 0, 2]);
    let actions_only = ep(vec![key(0), key(10)]);
    assert_eq!(nep_tau_order(&actions_only, 3), [0, 1]);
}

#[test]
fn single_small_sample() {
    // 25 mouse events of 19 tokens plus 1 keyboard event of 8 = 483 tokens.
    let mut events: Vec<Event> = (0..25)
        .map(|i| Event::Mouse(MouseEvent::movement(Timestamp::from_ms(i * 10), 1, -1)))
        .collect();
    events.push(key(300));
    let samples = pack_episode(&ep(events), &PackConfig::default()).unwrap();
    assert_eq!(samples.len(), 1);
    assert_eq!(samples[0].content_len(), 483);
    assert_eq!(samples[0].tokens.len(), 4096);
    assert!(samples[0].tokens[483..].iter().all(|&t| t == Token::Pad.id()));
    assert!(samples[0].access_plan.is_empty());
}

#[test]
fn twenty_screens_split_fifteen_five() {
    let events = (0..20).map(|i| screen(i * 50, i)).collect();
    let samples = pack_episode(&ep(events), &PackConfig::default()).unwrap();
    assert_eq!(samples.len(), 2);
    assert_eq!(samples[0].alignment.len(), 15);
    assert_eq!(samples[0].content_len(), 3930);
    assert_eq!(samples[1].alignment.len(), 5);
    assert_eq!(samples[1].content_len(), 1310);
    let plan0 = &samples[0].access_plan[&MediaSource::External("a.gops".into())];
    assert_eq!(plan0, &(0..15).collect::<Vec<u64>>());
}

#[test]
fn event_too_large() {
    let cfg = PackConfig {
        max_seq_len: 100,
        ..PackConfig::default()
    };
    let err = pack_episode(&ep(vec![key(0), screen(10, 0)]), &cfg).unwrap_err();
    assert!(matches!(
        err,
        FslError::EventTooLarge {
            event_index: 1,
            len: 262,
            max: 100,
            ..
        }
    ));
    assert!(matches!(cfg.validate(), Err(FslError::InvalidConfig(_))));
}

#[test]
fn access_plan_sorts_and_groups() {
    let mk = |uri: &str, frame| Alignment {
        span: 0..0,
        event_index: 0,
        screen: Some(ScreenRef {
            media: MediaRef::external(uri),
            frame_index: frame,
        }),
    };
    let plan = build_access_plan(&[mk("a", 7), mk("a", 3), mk("a", 3), mk("a", 9)]);
    assert_eq!(plan.len(), 1);
    assert_eq!(plan[&MediaSource::External("a".into())], [3, 7, 9]);
    let plan = build_access_plan(&[mk("b", 2), mk("a", 5), mk("b", 1)]);
    assert_eq!(plan[&MediaSource::External("a".into())], [5]);
    assert_eq!(plan[&MediaSource::External("b".into())], [1, 2]);
    assert!(build_access_plan(&[]).is_empty());
}

#[test]
fn empty_dataset() {
    let ds = pack_dataset(&[], &PackConfig::default()).unwrap();
    assert!(ds.samples.is_empty());
    let text = manifest_text(&ds, "media").unwrap();
    let m = parse_manifest(&text).unwrap();
    assert!(m.entries.is_empty());
    assert_eq!(m.header.samples, 0);
}

#[test]
fn manifest_roundtrip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut events: Vec<Event> = (0..40).map(|i| screen(i * 50, i)).collect();
    events.push(key(1010));
    let e = ep(events).normalize().unwrap();
    let cfg = PackConfig::default();
    let ds = pack_dataset(&[e.clone(), e], &cfg).unwrap();
    let header = write_dataset(dir.path(), &ds, "media dir").unwrap();
    assert_eq!(header.screen_frames, 80);
    assert_eq!(header.events, 82);
    let m = read_manifest(dir.path()).unwrap();
    assert_eq!(m.header, header);
    assert_eq!(m.entries.len(), ds.samples.len());
    assert_eq!(m.total_frames(), 80);
    for (k, (entry, sample)) in m.entries.iter().zip(&ds.samples).enumerate() {
        assert_eq!(entry.plan, sample.access_plan);
        assert_eq!(entry.content_len, sample.content_len());
        assert_eq!(read_sample_tokens(dir.path(), &m, k).unwrap(), sample.tokens);
    }
    let again = manifest_text(&ds, "media dir").unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap(), again);
}

#[test]
fn manifest_rejects_tabs() {
    let ds = pack_dataset(
        &[Episode::with_events("a\tb", vec![key(0)])],
        &PackConfig::default(),
    )
    .unwrap();
    assert!(manifest_text(&ds, "m").is_err());
}

fn arb_episode() -> impl Strategy<Value = Episode> {
    proptest::collection::vec((0u64..200, 0u8..4), 0..120).prop_map(|steps| {
        let mut t = 0;
        let mut frame = 0;
        let events = steps
            .into_iter()
            .map(|(gap, kind)| {
                t += gap;
                match kind {
                    0 => {
                        frame += 1;
                        screen(t, frame % 7)
                    }
                    1 => key(t),
                    _ => Event::Mouse(MouseEvent::movement(Timestamp::from_ms(t), 3, -2)),
                }
            })
            .collect();
        Episode::with_events("p", events)
    })
}

fn is_screen(e: &Event) -> bool {
    matches!(e, Event::Screen(_))
}

proptest! {
    #[test]
    fn nep_tau_is_a_permutation(e in arb_episode(), tau in 0usize..6) {
        let order = nep_tau_order(&e, tau);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..e.events.len()).collect::<Vec<_>>());
        let screens: Vec<usize> = order.iter().copied().filter(|&i| is_screen(&e.events[i])).collect();
        let chrono: Vec<usize> = (0..e.events.len()).filter(|&i| is_screen(&e.events[i])).collect();
        prop_assert_eq!(screens, chrono);
        let actions: Vec<usize> = order.iter().copied().filter(|&i| !is_screen(&e.events[i])).collect();
        prop_assert!(actions.windows(2).all(|w| w[0] < w[1]));
        if tau == 0 {
            prop_assert_eq!(order, (0..e.events.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn packing_conserves_events(e in arb_episode(), tau in 0usize..4, max in 262usize..1200) {
        let cfg = PackConfig { max_seq_len: max, tau, ..PackConfig::default() };
        let samples = pack_episode(&e, &cfg).unwrap();
        let seen: Vec<usize> = samples.iter().flat_map(|s| s.alignment.iter().map(|a| a.event_index)).collect();
        prop_assert_eq!(seen, nep_tau_order(&e, tau));
        for s in &samples {
            prop_assert_eq!(s.tokens.len(), max);
            let content = s.content_len();
            prop_assert!(s.tokens[..content].iter().all(|&t| t != Token::Pad.id()));
            prop_assert!(s.tokens[content..].iter().all(|&t| t == Token::Pad.id()));
            let mut pos = 0;
            for a in &s.alignment {
                prop_assert_eq!(a.span.start, pos);
                prop_assert_eq!(s.tokens[a.span.start], Token::EventStart.id());
                prop_assert_eq!(s.tokens[a.span.end - 1], Token::EventEnd.id());
                pos = a.span.end;
            }
            prop_assert_eq!(&s.access_plan, &build_access_plan(&s.alignment));
            let frames: usize = s.access_plan.values().map(Vec::len).sum();
            prop_assert!(frames <= max / 262);
            for frames in s.access_plan.values() {
                prop_assert!(frames.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}

/// Placement rule restated as a sort key: screen k sorts at (k, 0), an action
/// after screen j at (min(j + τ, last), 1), a leading action at (τ - 1, 1) or
/// before everything when τ = 0.
fn nep_oracle(e: &Episode, tau: usize) -> Vec<usize> {
    let n_screens = e.events.iter().filter(|x| is_screen(x)).count() as i64;
    if n_screens == 0 {
        return (0..e.events.len()).collect();
    }
    let last = n_screens - 1;
    let mut j: i64 = -1;
    let mut keyed: Vec<((i64, u8), usize)> = Vec::new();
    for (i, x) in e.events.iter().enumerate() {
        if is_screen(x) {
            j += 1;
            keyed.push(((j, 0), i));
        } else {
            let target = (j + tau as i64).min(last);
            keyed.push(((target, 1), i));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    keyed.into_iter().map(|(_, i)| i).collect()
}

proptest! {
    #[test]
    fn nep_tau_matches_oracle(e in arb_episode(), tau in 0usize..8) {
        prop_assert_eq!(nep_tau_order(&e, tau), nep_oracle(&e, tau));
    }
}
