//! Fuzzes the trajectory CSV reader: arbitrary input must produce either a
//! well-formed time series or a clean error, never a panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

use duoscale::config::parse_timeseries_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(series) = parse_timeseries_csv(text) {
        assert!(series.len() >= 2);
        assert!(series.dt.is_finite() && series.dt > 0.0);
        // accessors must stay in bounds for every reported sample
        for i in 0..series.len() {
            assert_eq!(series.displacement(i).len(), series.dim);
            assert_eq!(series.velocity(i).len(), series.dim);
            assert!(series.time(i).is_finite());
        }
    }
});
