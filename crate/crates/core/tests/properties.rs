//! Invariants checked exhaustively or by property-based generation.

use proptest::prelude::*;
use ssbft_recycle::mvc::eig::{CoMsg, Label};
use ssbft_recycle::object::{CoreMsg, DelayStub, EstField, EstPayload, RecyclableObject, SlotEst};
use ssbft_recycle::recycler::{ObjectArray, Window};
use ssbft_recycle::sig_index::{SigIndex, SigMsg};
use ssbft_recycle::transport::{demultiplex, multiplex, Msg};
use ssbft_recycle::NodeId;

fn window() -> impl Strategy<Value = Window> {
    (2usize..=24).prop_flat_map(|index_num| {
        (0..=index_num - 2).prop_map(move |log_size| Window {
            index_num,
            log_size,
        })
    })
}

proptest! {
    #[test]
    fn slots_and_contains_agree(w in window(), ind in any::<u64>()) {
        let slots = w.slots(ind);
        prop_assert_eq!(slots.len(), w.log_size + 1);
        prop_assert_eq!(*slots.last().unwrap() as u64, ind % w.index_num as u64);
        for s in 0..w.index_num {
            prop_assert_eq!(w.contains(ind, s), slots.contains(&s));
        }
    }

    #[test]
    fn a_unit_slide_retires_exactly_the_oldest_slot(w in window(), ind in 0u64..1_000) {
        let before = w.slots(ind);
        let after = w.slots(ind + 1);
        let left: Vec<usize> = before.iter().copied().filter(|s| !after.contains(s)).collect();
        prop_assert_eq!(left, vec![before[0]]);
    }

    #[test]
    fn recycler_leaves_only_window_slots_live(w in window(), ind in any::<u64>(), live in proptest::collection::vec(any::<bool>(), 24)) {
        let mut array = ObjectArray::new(DelayStub::default(), NodeId(0), 4, 1, w);
        for (obj, &l) in array.objs.iter_mut().zip(&live) {
            if l {
                obj.propose(true);
            }
        }
        let recycled = array.recycler_pulse(ind);
        for (s, obj) in array.objs.iter().enumerate() {
            prop_assert!(w.contains(ind, s) || obj.is_fresh());
            prop_assert_eq!(recycled.contains(&s), live[s] && !w.contains(ind, s));
        }
        prop_assert!(array.non_fresh() <= w.log_size + 1);
    }

    #[test]
    fn multiplex_round_trips(
        slots in proptest::collection::vec((0u16..64, any::<bool>(), 0u8..5), 0..6),
        co in proptest::option::of(proptest::collection::vec((0u8..4, proptest::option::of(any::<bool>())), 0..5)),
        sig in proptest::option::of(prop_oneof![
            any::<u64>().prop_map(SigMsg::Index),
            proptest::option::of(any::<u64>()).prop_map(SigMsg::Propose),
            any::<bool>().prop_map(SigMsg::Bit),
        ]),
    ) {
        let est = EstField {
            entries: slots
                .iter()
                .map(|&(slot, delivered, core)| SlotEst {
                    slot,
                    est: EstPayload {
                        core: match core {
                            0 => None,
                            1 => Some(CoreMsg::Stub(delivered)),
                            2 => Some(CoreMsg::Est(delivered)),
                            3 => Some(CoreMsg::Aux(None)),
                            _ => Some(CoreMsg::Aux(Some(delivered))),
                        },
                        delivered,
                    },
                })
                .collect(),
        };
        let co = co.map(|entries| CoMsg {
            level: 1,
            entries: entries.into_iter().map(|(j, v)| (Label(vec![j]), v)).collect(),
        });
        let msg = multiplex(Some(est.clone()), co.clone(), sig.clone());
        prop_assert_eq!(demultiplex(msg.clone()), (Some(est), co, sig));
        let json = serde_json::to_string(&msg).unwrap();
        let back: Msg = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.to_bytes(), msg.to_bytes());
    }
}

/// `wasDelivered()` is exactly "at least `n − t` flags", for every flag vector.
#[test]
fn was_delivered_matches_threshold_for_every_vector() {
    for n in 1..=9usize {
        for t in 0..=(n - 1) / 3 {
            for bits in 0u32..1 << n {
                let mut obj = RecyclableObject::new(DelayStub::default(), NodeId(0), n, t);
                obj.delivered = (0..n).map(|j| bits >> j & 1 == 1).collect();
                assert_eq!(
                    obj.was_delivered(),
                    bits.count_ones() as usize >= n - t,
                    "n={n} t={t} bits={bits:b}"
                );
            }
        }
    }
}

/// Every value a receiver could propose at the second SIG-index phase,
/// over every per-receiver choice of `byz` faulty senders.
fn possible_proposals(
    correct: &[u64],
    byz: usize,
    domain: u64,
    n: usize,
    t: usize,
) -> Vec<Option<u64>> {
    let combos = (domain + 1).pow(byz as u32);
    (0..combos)
        .map(|mut code| {
            let mut inbox: Vec<Option<SigMsg>> =
                correct.iter().map(|&v| Some(SigMsg::Index(v))).collect();
            for _ in 0..byz {
                let c = code % (domain + 1);
                code /= domain + 1;
                inbox.push((c < domain).then_some(SigMsg::Index(c)));
            }
            let mut s = SigIndex::new(n, t, domain.max(2), 5);
            match s.pulse(2, &inbox, None, false) {
                Some(SigMsg::Propose(p)) => p,
                other => panic!("unexpected {other:?}"),
            }
        })
        .collect()
}

/// No two correct nodes propose different non-⊥ values, whatever the
/// Byzantine nodes send to each of them.
#[test]
fn correct_proposals_carry_at_most_one_value() {
    let domain = 3u64;
    for n in 4..=6usize {
        let t = (n - 1) / 3;
        let correct_count = n - t;
        for code in 0..domain.pow(correct_count as u32) {
            let mut c = code;
            let correct: Vec<u64> = (0..correct_count)
                .map(|_| {
                    let v = c % domain;
                    c /= domain;
                    v
                })
                .collect();
            let mut values = possible_proposals(&correct, t, domain, n, t);
            values.retain(Option::is_some);
            values.sort_unstable();
            values.dedup();
            assert!(
                values.len() <= 1,
                "n={n} correct={correct:?} proposals={values:?}"
            );
            if correct.iter().all(|&v| v == correct[0]) {
                assert_eq!(values, vec![Some(correct[0])]);
            }
        }
    }
}
