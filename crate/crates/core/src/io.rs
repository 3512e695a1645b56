//! Fleet and price CSV files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Ev, EvId, GroupId, ModelError, PriceSeries};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("price file row {row}: expected slot {expected}, found {found}")]
    SlotOrder { row: usize, expected: usize, found: usize },
    #[error("{0}")]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetRow {
    pub ev_id: u32,
    pub group_id: u32,
    pub arrival_slot: usize,
    pub departure_slot: usize,
    pub p_max_kw: f64,
    pub e_req_kwh: f64,
    pub e_max_kwh: f64,
    pub e_cap_kwh: f64,
}

impl FleetRow {
    pub fn to_ev<S: Scalar>(&self) -> Ev<S> {
        Ev {
            id: EvId(self.ev_id),
            group_id: GroupId(self.group_id),
            p_max: S::lit(self.p_max_kw),
            e_req: S::lit(self.e_req_kwh),
            e_max: S::lit(self.e_max_kwh),
            e_cap: S::lit(self.e_cap_kwh),
            arrival_slot: self.arrival_slot,
            departure_slot: self.departure_slot,
        }
    }

    pub fn from_ev<S: Scalar>(ev: &Ev<S>) -> Self {
        Self {
            ev_id: ev.id.0,
            group_id: ev.group_id.0,
            arrival_slot: ev.arrival_slot,
            departure_slot: ev.departure_slot,
            p_max_kw: ev.p_max.as_f64(),
            e_req_kwh: ev.e_req.as_f64(),
            e_max_kwh: ev.e_max.as_f64(),
            e_cap_kwh: ev.e_cap.as_f64(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub slot: usize,
    pub price_usd_per_kwh: f64,
}

pub fn read_fleet<S: Scalar, R: Read>(input: R) -> Result<Vec<Ev<S>>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    rdr.deserialize::<FleetRow>().map(|row| Ok(row?.to_ev())).collect()
}

pub fn write_fleet<S: Scalar, W: Write>(fleet: &[Ev<S>], out: W) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(out);
    for ev in fleet {
        wtr.serialize(FleetRow::from_ev(ev))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rows must list slots 0, 1, 2, … in order.
pub fn read_prices<S: Scalar, R: Read>(input: R) -> Result<PriceSeries<S>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut prices = Vec::new();
    for (row, rec) in rdr.deserialize::<PriceRow>().enumerate() {
        let rec = rec?;
        if rec.slot != row {
            return Err(IoError::SlotOrder {
                row,
                expected: row,
                found: rec.slot,
            });
        }
        prices.push(S::lit(rec.price_usd_per_kwh));
    }
    Ok(PriceSeries::new(prices)?)
}

pub fn write_prices<S: Scalar, W: Write>(prices: &[S], out: W) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(out);
    for (slot, p) in prices.iter().enumerate() {
        wtr.serialize(PriceRow {
            slot,
            price_usd_per_kwh: p.as_f64(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLEET: &str = "ev_id,group_id,arrival_slot,departure_slot,p_max_kw,e_req_kwh,e_max_kwh,e_cap_kwh\n\
                         1,0,0,1,1,1,2,2\n\
                         2, 0, 0, 2, 2.5, 1, 2, 3\n";

    #[test]
    fn fleet_round_trip() {
        let fleet: Vec<Ev<f64>> = read_fleet(FLEET.as_bytes()).unwrap();
        assert_eq!(fleet.len(), 2);
        assert_eq!(fleet[1].p_max, 2.5);
        assert_eq!(fleet[1].e_cap, 3.0);
        let mut buf = Vec::new();
        write_fleet(&fleet, &mut buf).unwrap();
        let again: Vec<Ev<f64>> = read_fleet(buf.as_slice()).unwrap();
        assert_eq!(again, fleet);
    }

    #[test]
    fn missing_column_is_an_error() {
        let bad = "ev_id,group_id\n1,0\n";
        assert!(read_fleet::<f64, _>(bad.as_bytes()).is_err());
    }

    #[test]
    fn prices_round_trip_and_order() {
        let p: PriceSeries<f64> = read_prices("slot,price_usd_per_kwh\n0,0.1\n1,-0.02\n".as_bytes()).unwrap();
        assert_eq!(p.prices(), &[0.1, -0.02]);
        let mut buf = Vec::new();
        write_prices(p.prices(), &mut buf).unwrap();
        assert_eq!(read_prices::<f64, _>(buf.as_slice()).unwrap(), p);
        let err = read_prices::<f64, _>("slot,price_usd_per_kwh\n1,0.1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IoError::SlotOrder { found: 1, .. }));
        assert!(read_prices::<f64, _>("slot,price_usd_per_kwh\n".as_bytes()).is_err());
    }
}
