use alphasoft::link::{encode_frame, pace_frames, FrameDecoder, Pacer};
use proptest::prelude::*;

#[test]
fn pacer_examples() {
    let readings: Vec<(u64, u32)> = (0..69).map(|i| (1996 + 1000 * i, i as u32)).collect();
    let every = pace_frames(&readings, 1000);
    assert_eq!(every.len(), 69);
    let fifth = pace_frames(&readings, 5000);
    let expected: Vec<u32> = (0..69).step_by(5).collect();
    assert_eq!(fifth.iter().map(|(_, v)| *v).collect::<Vec<_>>(), expected);
}

#[test]
fn pacer_forwards_only_the_newest() {
    let mut p = Pacer::new(1000);
    p.offer(1);
    assert_eq!(p.poll(0), Some(1));
    p.offer(2);
    p.offer(3);
    assert_eq!(p.poll(999), None);
    assert_eq!(p.poll(1000), Some(3));
    assert_eq!(p.poll(2000), None);
}

proptest! {
    #[test]
    fn any_value_stream_roundtrips_under_any_chunking(
        values in prop::collection::vec(0u8..=100, 0..50),
        cuts in prop::collection::vec(1usize..8, 1..40),
    ) {
        let stream: Vec<u8> = values.iter().flat_map(|&v| encode_frame(v).unwrap()).collect();
        let mut dec = FrameDecoder::new();
        let mut out = Vec::new();
        let mut pos = 0;
        let mut i = 0;
        while pos < stream.len() {
            let end = (pos + cuts[i % cuts.len()]).min(stream.len());
            out.extend(dec.decode(&stream[pos..end]));
            pos = end;
            i += 1;
        }
        prop_assert_eq!(out, values);
        prop_assert_eq!(dec.error_count(), 0);
        prop_assert_eq!(dec.pending(), 0);
    }

    #[test]
    fn arbitrary_garbage_never_yields_out_of_range(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let mut dec = FrameDecoder::new();
        let out = dec.decode(&bytes);
        prop_assert!(out.iter().all(|&v| v <= 100));
        // after garbage, a clean frame following an LF always decodes
        let mut tail = vec![b'\n'];
        tail.extend(encode_frame(42).unwrap());
        let decoded = dec.decode(&tail);
        prop_assert_eq!(decoded.last(), Some(&42));
    }
}
