import cascadeqm.utils
import cascadeqm.system
import cascadeqm.transfer
import cascadeqm.efficiency
import cascadeqm.ensemble
import cascadeqm.optimizer
import cascadeqm.simulation
import cascadeqm.verification
import cascadeqm.io
import cascadeqm.cli
import cascadeqm.version
