"""
Boundary Probe - mapping a network's classification boundary near clean images

Trains a seed-varied ensemble, generates adversarial sets with six attack
families, builds hyper-rectangles that contain infinitely many adversarial
examples and sorts them into uncertainty regions and transferable
adversarial regions.
"""

__version__ = "1.0.0"
