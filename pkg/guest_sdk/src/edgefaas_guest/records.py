"""Decoding helpers for the payloads guest functions commonly receive.

IMU records cross the bridge as 64-bit floats: six little-endian f64 values
(accel xyz, then gyro xyz), with the sample timestamp in the record's
source_ts. Frames cross as unsigned 8-bit views; geometry, when needed, comes
from the function's params.
"""

from __future__ import annotations

import struct
from typing import NamedTuple

_IMU = struct.Struct("<6d")


class ImuReading(NamedTuple):
    ts: int
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]


def decode_imu(record) -> ImuReading:
    """Decode a GuestRecord carrying one IMU sample."""
    ax, ay, az, gx, gy, gz = _IMU.unpack(record.payload)
    return ImuReading(record.source_ts, (ax, ay, az), (gx, gy, gz))
