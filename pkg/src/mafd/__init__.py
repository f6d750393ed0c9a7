"""Joint movable-antenna placement and UL/DL transmit-power optimization
for a full-duplex satellite serving multiple user terminals.

Layering: ``scenario`` generates seeded instances; ``channel`` realizes
position-dependent channels; ``receiver`` evaluates zero-forcing SINR
statistics; ``conic`` hosts the cone-program layer; ``inner`` solves the
robust power/beamforming problem at fixed positions; ``pso`` searches the
positions; ``experiments``/``cli`` reproduce the trend studies.
"""

__version__ = "0.1.0"
