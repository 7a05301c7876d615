"""Line-scan imaging workbench.

Simulates a 1D sensor under LED, collimated-laser or ideal telecentric
back-lighting (plus a pinhole-lens front-lit mode), and implements the full
measurement chain on top: sizing calculators, subpixel edge/diameter
metrology with speckle compensation, and sheet-of-light height estimation.
Hot kernels run in a compiled extension when available, with a bit-identical
pure-Python fallback.
"""

from .backend import active_backend_name, available_backends, use_backend
from .dsp import (
    DiameterConfig,
    EdgeDetectConfig,
    background_correct,
    calibrate_height,
    detect_edges,
    find_peak_apex,
    height_from_peak,
    measure_diameter,
    sharpness_rate,
)
from .model import (
    CollimatedLaser,
    DiameterResult,
    EdgeEstimate,
    ExtendedLed,
    GeometryError,
    HeightCalibration,
    HeightEstimate,
    IdealTelecentric,
    LineImage,
    LinescanError,
    MeasurementError,
    Motion,
    Occluder,
    SceneSetup,
    SensorSpec,
    SpeckleParams,
    TimingModel,
    TriangulationGeometry,
    ValidationError,
    laser_expander_preset,
    led_reflector_preset,
    mlx75306_preset,
)
from .optics import (
    LensModel,
    RaySegment,
    RenderConfig,
    analytic_penumbra,
    generate_speckle,
    render_lens,
    render_lensless,
    trace_rays,
)
from .sizing import (
    achievable_line_rate,
    led_electrical_energy,
    max_transport_speed,
    mlx75306_timing,
    required_line_rate,
    required_pixel_count,
    spi_limited_timing,
)
from .stream import (
    MeasurementRecord,
    ScanProfile,
    generate_scan,
    run_diameter_pipeline,
    run_height_pipeline,
    throughput_report,
)

__version__ = "0.1.0"
