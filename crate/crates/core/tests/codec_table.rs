use bridge_core::codec::{decode_byte, decode_bytes, encode_char, encode_text, EncodePolicy};
use proptest::prelude::*;

fn table() -> Vec<(u8, char)> {
    include_str!("../data/mac_roman.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut cols = l.split('\t');
            let byte = u8::from_str_radix(cols.next().unwrap().trim_start_matches("0x"), 16).unwrap();
            let scalar = u32::from_str_radix(cols.next().unwrap().trim_start_matches("0x"), 16).unwrap();
            (byte, char::from_u32(scalar).unwrap())
        })
        .collect()
}

#[test]
fn table_is_total() {
    let t = table();
    assert_eq!(t.len(), 256);
    assert!(t.iter().enumerate().all(|(i, (b, _))| *b as usize == i));
}

#[test]
fn decode_matches_table_and_round_trips() {
    for (b, c) in table() {
        assert_eq!(decode_byte(b), c, "byte {b:#04x}");
        assert_eq!(encode_char(c), Some(b), "char {c:?}");
    }
}

#[test]
fn agrees_with_encoding_rs_on_high_half() {
    // encoding_rs follows the WHATWG "macintosh" index, which leaves the
    // ASCII half and control bytes alone and matches Apple's table above.
    let all: Vec<u8> = (0..=255).collect();
    let (reference, _, had_errors) = encoding_rs::MACINTOSH.decode(&all);
    assert!(!had_errors);
    assert_eq!(decode_bytes(&all), reference);
}

#[test]
fn known_points() {
    for (b, c) in [(0x8E, 'é'), (0xA5, '•'), (0xDB, '€'), (0xC9, '…'), (0xCA, '\u{a0}'), (0xF0, '\u{f8ff}'), (0x0D, '\r')] {
        assert_eq!(decode_byte(b), c);
    }
}

#[test]
fn unmappable_policies() {
    assert_eq!(encode_text("a→b", EncodePolicy::default()).unwrap().as_bytes(), b"a?b");
    let err = encode_text("ab→", EncodePolicy::Reject).unwrap_err();
    assert_eq!((err.position, err.character), (2, '→'));
}

proptest! {
    #[test]
    fn bytes_round_trip(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let text = decode_bytes(&bytes);
        prop_assert_eq!(encode_text(&text, EncodePolicy::Reject).unwrap().into_bytes(), bytes.clone());
        let (reference, _, unmappable) = encoding_rs::MACINTOSH.encode(&text);
        prop_assert!(!unmappable);
        prop_assert_eq!(&reference[..], &bytes[..]);
    }
}
