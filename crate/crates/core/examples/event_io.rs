//! Event stream formats and the basic stream operations.

use evsr::{Event, EventStream, Polarity, TimeWindow};

fn main() -> evsr::Result<()> {
    let text = "8 8 1000\n100,1,2,1\n40,3,3,-1\n700,6,7,1\n";
    let s = EventStream::parse_text(text.as_bytes())?;
    // parsing sorts into canonical order
    println!("parsed:\n{}", s.to_text());

    let bytes = s.write_binary();
    assert_eq!(EventStream::read_binary(&bytes)?, s);
    println!(
        "binary: {} bytes (16-byte header + 10 per event)",
        bytes.len()
    );

    let early = s.slice(TimeWindow::new(0, 500)?)?;
    let late = s.slice(TimeWindow::new(500, 1001)?)?.shifted(500)?;
    println!("slices hold {} and {} events", early.len(), late.len());
    assert_eq!(EventStream::merge([&early, &late])?.events(), s.events());

    let (on, off) = s.split_polarity();
    println!("{} ON, {} OFF", on.len(), off.len());

    let small = s.downsample_spatial(2)?;
    println!(
        "downsampled to {}x{}: {:?}",
        small.width(),
        small.height(),
        small.events()[0]
    );

    let bad = EventStream::new(8, 8, 1000, vec![Event::new(10, 9, 0, Polarity::On)]);
    println!("out-of-range event rejected: {}", bad.unwrap_err());
    Ok(())
}
