"""Benchmark harness comparing the compiled and pure-Python kernel backends.

Measures the Monte Carlo render (rays/s) and the diameter pipeline
(lines/s) on each importable backend and checks that both produce identical
output. Exposed as ``linescan bench``.
"""

from __future__ import annotations

import time

import numpy as np

from . import backend
from .model import Occluder, SceneSetup, SensorSpec, mlx75306_preset
from .optics import RenderConfig, render_lensless
from .model import IdealTelecentric
from .stream import throughput_report


def _time_render(sensor: SensorSpec, rays: int, repeats: int = 3) -> dict:
    scene = SceneSetup(object_distance=20.0,
                       occluder=Occluder(center_x=0.0, diameter=3.0))
    cfg = RenderConfig(rays_per_pixel=rays, rng_seed=7, add_sensor_noise=False)
    light = IdealTelecentric()
    render_lensless(scene, light, sensor, cfg)  # warm-up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        frame = render_lensless(scene, light, sensor, cfg)
        best = min(best, time.perf_counter() - t0)
    total_rays = rays * sensor.pixel_count
    return {
        "seconds_per_frame": best,
        "rays_per_second": total_rays / best,
        "checksum": int(np.sum(frame.values.astype(np.int64))),
    }


def run_benchmark(frames: int = 20000, rays: int = 2000,
                  pixels: int = 142) -> dict:
    """Render + pipeline benchmark over every available backend."""
    sensor = mlx75306_preset()
    if pixels != sensor.pixel_count:
        sensor = SensorSpec(pixel_count=pixels,
                            pixel_pitch=7000.0 / pixels)
    original = backend.active_backend_name()
    report = {"pixels": pixels, "rays_per_pixel": rays, "frames": frames,
              "backends": {}}
    try:
        for name in sorted(backend.available_backends()):
            backend.use_backend(name)
            render = _time_render(sensor, rays)
            pipe = throughput_report(frames, "diameter", sensor)
            report["backends"][name] = {
                "render": render,
                "pipeline_lines_per_second": pipe["lines_per_second"],
            }
    finally:
        backend.use_backend(original)

    checksums = {b["render"]["checksum"]
                 for b in report["backends"].values()}
    report["backends_agree"] = len(checksums) == 1
    return report


def format_report(report: dict) -> str:
    lines = [
        f"pixels={report['pixels']}  rays/pixel={report['rays_per_pixel']}  "
        f"frames={report['frames']}",
        f"{'backend':<10} {'render Mrays/s':>15} {'pipeline lines/s':>18}",
    ]
    for name, data in sorted(report["backends"].items()):
        lines.append(
            f"{name:<10} {data['render']['rays_per_second'] / 1e6:>15.2f} "
            f"{data['pipeline_lines_per_second']:>18.0f}")
    lines.append("backends agree bit-for-bit: "
                 + ("yes" if report["backends_agree"] else "NO"))
    return "\n".join(lines)
