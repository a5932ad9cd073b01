"""
stdml - spatiotemporal double machine learning on gridded two-period data
"""

__version__ = "1.0.0"
