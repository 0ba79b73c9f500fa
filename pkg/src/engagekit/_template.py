"""Canonical mean-face template: 78 2D points in the unit square.

Node ordering matches the engine convention (jaw 0-16, brows 17-26,
nose 27-35, eyes 36-47, lips 48-67, left iris 68-72, right iris 73-77).
Coordinates carry a tiny frozen jitter so the point set is in general
position; the intra-frame graph is triangulated from this table once and
shared by all subjects.
"""

TEMPLATE_POINTS = [
    (0.220830, 0.461273),
    (0.224541, 0.534301),
    (0.240086, 0.603927),
    (0.268549, 0.672210),
    (0.303320, 0.729294),
    (0.345716, 0.775181),
    (0.391455, 0.811458),
    (0.445367, 0.833453),
    (0.498917, 0.839634),
    (0.553942, 0.833738),
    (0.608096, 0.811249),
    (0.655341, 0.776925),
    (0.697275, 0.728616),
    (0.734021, 0.669647),
    (0.757372, 0.606399),
    (0.774749, 0.534842),
    (0.780798, 0.458790),
    (0.283827, 0.355038),
    (0.321999, 0.340357),
    (0.359760, 0.331593),
    (0.396469, 0.340015),
    (0.435346, 0.354811),
    (0.565090, 0.353871),
    (0.601631, 0.338177),
    (0.641036, 0.331816),
    (0.676830, 0.338038),
    (0.713576, 0.354801),
    (0.500894, 0.385211),
    (0.501359, 0.439688),
    (0.500219, 0.495222),
    (0.500023, 0.549619),
    (0.439952, 0.586255),
    (0.471337, 0.594440),
    (0.499204, 0.596562),
    (0.528834, 0.594286),
    (0.559114, 0.583689),
    (0.309764, 0.440476),
    (0.340806, 0.419204),
    (0.390000, 0.418819),
    (0.420346, 0.440145),
    (0.389487, 0.460825),
    (0.339618, 0.461311),
    (0.580177, 0.441456),
    (0.608763, 0.419348),
    (0.658408, 0.419983),
    (0.690648, 0.440804),
    (0.660531, 0.460778),
    (0.610879, 0.460661),
    (0.404043, 0.704079),
    (0.436869, 0.676383),
    (0.467333, 0.677093),
    (0.501458, 0.680499),
    (0.531834, 0.678492),
    (0.561881, 0.677659),
    (0.594617, 0.703503),
    (0.563083, 0.738252),
    (0.532267, 0.736895),
    (0.498925, 0.738279),
    (0.467724, 0.736771),
    (0.438129, 0.737595),
    (0.439395, 0.705537),
    (0.469035, 0.691506),
    (0.498923, 0.692389),
    (0.532150, 0.693794),
    (0.561379, 0.704872),
    (0.529809, 0.717698),
    (0.499010, 0.716898),
    (0.467586, 0.717351),
    (0.365091, 0.441363),
    (0.366317, 0.424255),
    (0.379901, 0.440652),
    (0.364956, 0.455828),
    (0.347676, 0.438624),
    (0.636371, 0.440444),
    (0.635095, 0.423662),
    (0.651616, 0.441275),
    (0.635928, 0.456124),
    (0.618288, 0.438942),
]
