import udakit.ndgraph as ndgraph
import udakit.data as data
import udakit.models as models
import udakit.divergences as divergences
import udakit.algorithms as algorithms
import udakit.monitor as monitor
import udakit.bench as bench
