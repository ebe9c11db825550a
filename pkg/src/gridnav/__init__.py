"""Point cloud -> octree -> occupancy grid conversion, and value-based RL path planning."""

__version__ = "0.1.0"
