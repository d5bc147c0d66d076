#!/usr/bin/env python3
"""The planning arithmetic: from wire length to how long a donated key lasts.

Run: python3 demos/04_key_lifetime.py
"""

from kljnsim import LifetimeParams, key_lifetime, key_lifetime_closed_form

# A practical roadside deployment: 1 km line to the certification authority,
# cable wave speed 2e8 m/s, a tenth of the no-wave bandwidth budget, 100
# correlation times of averaging per bit, 100-bit keys, and one roadside
# device serving a thousand cars.
params = LifetimeParams(
    theta=0.1,
    wave_speed=2e8,
    line_length=1000.0,
    gamma=100.0,
    key_length=100.0,
    car_density=1000.0,
)
report = key_lifetime(params)

print("=== Rate chain ===")
print(f"noise bandwidth    : {report.noise_bandwidth:12.0f} Hz")
print(f"secure bit rate    : {report.secure_bit_rate:12.1f} bit/s"
      "   (half the periods are secure)")
print(f"per-car bit rate   : {report.per_car_rate:12.3f} bit/s"
      f"   (shared by {params.car_density:.0f} cars)")
print(f"key lifetime       : {report.key_lifetime:12.1f} s"
      "   (time to earn the next 100-bit key)")
print(f"closed form agrees : {abs(key_lifetime_closed_form(params)/report.key_lifetime - 1):.2e}"
      " relative")

print("\n=== What moves the lifetime ===")
variants = [
    ("2x line length", dict(line_length=2000.0)),
    ("2x averaging (gamma)", dict(gamma=200.0)),
    ("2x cars per device", dict(car_density=2000.0)),
    ("4 parallel channels", dict(parallel_channels=4)),
    ("half the key size", dict(key_length=50.0)),
]
import dataclasses

for label, change in variants:
    tau = key_lifetime(dataclasses.replace(params, **change)).key_lifetime
    print(f"  {label:22s}: {tau:8.1f} s")

print("\nWith the density read as the largest load any single roadside device")
print("carries, the lifetime above is a pessimistic upper limit: real traffic")
print("that is lighter anywhere refreshes keys faster than this bound.")

# The warnings kick in when the physics assumptions get strained.
strained = key_lifetime(dataclasses.replace(params, theta=0.5, gamma=5.0))
print(f"\ntheta=0.5, gamma=5 -> no_wave_warning={strained.no_wave_warning}, "
      f"gamma_warning={strained.gamma_warning}")
