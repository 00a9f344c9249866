import os
import sys

# let test modules import sibling helpers (gradcheck) regardless of rootdir
sys.path.insert(0, os.path.dirname(__file__))
