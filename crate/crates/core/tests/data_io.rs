use amrp::data_io::{
    read_labels, read_recording, segment_trials, synthesize_session, write_labels,
    write_recording_to, ChannelLayout, ClassProfile, StimulusProtocol, Target,
};

/// Power in `[lo, hi]` Hz from a direct DFT, bin by bin.
fn band_power(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let df = fs / n as f64;
    let (k0, k1) = ((lo / df).ceil() as usize, (hi / df).floor() as usize);
    (k0..=k1)
        .map(|k| {
            let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, v)| {
                (re + v * (w * t as f64).cos(), im - v * (w * t as f64).sin())
            });
            (re * re + im * im) / n as f64
        })
        .sum()
}

#[test]
fn synthetic_alpha_power_follows_like_label() {
    let protocol = StimulusProtocol {
        food_count: 12,
        ..StimulusProtocol::default()
    };
    let layout = ChannelLayout::default();
    let (rec, labels) =
        synthesize_session(&protocol, &layout, &ClassProfile::alpha_profile(), 3).unwrap();
    let trials = segment_trials(&rec, &protocol).unwrap();
    assert_eq!(trials.len(), 12);
    let fs = protocol.sample_rate_hz;
    let (mut hi, mut lo) = (Vec::new(), Vec::new());
    for t in &trials {
        let p: f64 = t
            .samples
            .iter()
            .map(|ch| band_power(ch, fs, 8.5, 11.5))
            .sum();
        match labels.get(t.food_index).unwrap().get(Target::Like) {
            1 => hi.push(p),
            _ => lo.push(p),
        }
    }
    assert_eq!(hi.len(), 6);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ratio = mean(&hi) / mean(&lo);
    assert!((2.5..=5.5).contains(&ratio), "alpha power ratio {ratio}");
}

#[test]
fn synthetic_session_is_seeded() {
    let protocol = StimulusProtocol {
        food_count: 4,
        ..StimulusProtocol::default()
    };
    let layout = ChannelLayout::default();
    let p = ClassProfile::alpha_profile();
    let a = synthesize_session(&protocol, &layout, &p, 9).unwrap();
    let b = synthesize_session(&protocol, &layout, &p, 9).unwrap();
    let c = synthesize_session(&protocol, &layout, &p, 10).unwrap();
    assert_eq!(a.0.samples(), b.0.samples());
    assert_ne!(a.0.samples(), c.0.samples());
}

#[test]
fn recording_and_labels_round_trip_through_csv() {
    let protocol = StimulusProtocol {
        food_count: 2,
        ..StimulusProtocol::default()
    };
    let layout = ChannelLayout::default();
    let (rec, labels) =
        synthesize_session(&protocol, &layout, &ClassProfile::alpha_profile(), 1).unwrap();
    let mut buf = Vec::new();
    write_recording_to(&mut buf, &rec).unwrap();
    let back = read_recording(buf.as_slice(), &layout, protocol.sample_rate_hz).unwrap();
    assert_eq!(back.len(), rec.len());
    for (x, y) in back
        .samples()
        .iter()
        .flatten()
        .zip(rec.samples().iter().flatten())
    {
        assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    write_labels(&path, &labels).unwrap();
    let text = std::fs::read(&path).unwrap();
    assert_eq!(read_labels(text.as_slice()).unwrap(), labels);
}
