'''
QSVT-based post-selection-free state preparation and teleportation decoding
'''

__version__ = '0.1.0'
