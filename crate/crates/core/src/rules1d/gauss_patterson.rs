// Gauss-Patterson tables on [-1, 1], levels 1..=8 (N = 2^l - 1 points).
// Nodes are symmetric; only the strictly positive nodes NEW to each level
// are stored (level 1 contributes the origin). Weights are stored for the
// nonnegative half, ascending by node, center first. Generated offline by
// repeated Stieltjes extension in multi-precision arithmetic and checked
// for monomial exactness through degree (3N+1)/2 at every level.

pub(super) const MAX_LEVEL: u32 = 8;

pub(super) static NEW_POSITIVE_NODES: [&[f64]; 8] = [
    // level 1
    &[
    ],
    // level 2
    &[
        0.774596669241483377035853079956,
    ],
    // level 3
    &[
        0.434243749346802558002071502845,
        0.960491268708020283423507092629,
    ],
    // level 4
    &[
        0.223386686428966881628203986844,
        0.621102946737226402940687443817,
        0.888459232872256998890420167259,
        0.993831963212755022208512841308,
    ],
    // level 5
    &[
        0.112488943133186625745843327560,
        0.331135393257976833092640782249,
        0.531319743644375623972103438052,
        0.702496206491527078609800156008,
        0.836725938168868735502753818110,
        0.929654857429740056670125725933,
        0.981531149553740106867361888547,
        0.999098124967667597662226062413,
    ],
    // level 6
    &[
        0.0563443130465927899719678607894,
        0.168235251552207464982313275440,
        0.277749822021824315065356412191,
        0.383359324198730346916485193850,
        0.483618026945841027562153280532,
        0.577195710052045814843690955654,
        0.662909660024780595461015255689,
        0.739756044352694758677217797248,
        0.806940531950217611856307980888,
        0.863907938193690477146415857373,
        0.910371156957004292497790670607,
        0.946342858373402905148496208230,
        0.972182874748581796578058835235,
        0.988684757547429479938528919614,
        0.997206259372221959076452532976,
        0.999872888120357611937956782214,
    ],
    // level 7
    &[
        0.0281846489497456943393973278704,
        0.0844540400837108837101821672794,
        0.140424233152560174593819634863,
        0.195897502711100153915460230694,
        0.250678730303483176612957105311,
        0.304576441556714043335324049985,
        0.357403837831532152376214925551,
        0.408979821229888672409031653482,
        0.459130011989832332873501971840,
        0.507687757533716602154783137518,
        0.554495132631932548866381362002,
        0.599403930242242892974251049644,
        0.642276642509759513774113624214,
        0.682987431091079228087077605444,
        0.721423085370098915484976184425,
        0.757483966380513637926269606413,
        0.791084933799848361434638057884,
        0.822156254364980407372527142399,
        0.850644494768350279757827407542,
        0.876513414484705269741626645388,
        0.899744899776940036638633212194,
        0.920340025470012420729821382966,
        0.938320397779592883654822310658,
        0.953730006425761136414748643963,
        0.966637851558416567092279836371,
        0.977141514639705714156395810917,
        0.985371499598520371113758241327,
        0.991495721178106132398500079083,
        0.995724104698407188509439459018,
        0.998316635318407392530634580111,
        0.999598799671910683251967529212,
        0.999982430354891598580012135905,
    ],
    // level 8
    &[
        0.0140938864107824626141884882355,
        0.0422691647653636032124048988445,
        0.0704069760428551790632968760556,
        0.0984823965981192020902757578971,
        0.126470584372301966850663538759,
        0.154346811481378108692446779988,
        0.182086496759252198246399488588,
        0.209665238243181194766342717964,
        0.237058845589829727212668030349,
        0.264243372410926761944948292978,
        0.291195148518246681963691099018,
        0.317890812068476683181739338726,
        0.344307341599438022776622416041,
        0.370422087950078230137537383958,
        0.396212806057615939182521394285,
        0.421657686626163300056304726883,
        0.446735387662028473742222281593,
        0.471425065871658876934088018252,
        0.495706407918761460170111534009,
        0.519559661537457021992914143047,
        0.542965666498311490492303133422,
        0.565905885423654422622970392231,
        0.588362434447662541434367386276,
        0.610318113715186400155578672320,
        0.631756437711194230413584623173,
        0.652661665410017496100770934689,
        0.673018830230418479198879472690,
        0.692813769779114702894651485928,
        0.712033155362252034586679081014,
        0.730664521242181261329306715350,
        0.748696293616936602822828737479,
        0.766117819303760090716674093891,
        0.782919394118283016385180478370,
        0.799092290960841401799803164024,
        0.814628787655137413435816577891,
        0.829522194637401400178105088351,
        0.843766882672708601038314138626,
        0.857358310886232156525126596087,
        0.870293055548113905851151444155,
        0.882568840247341906841695404229,
        0.894184568335559022859352159223,
        0.905140358813261595189303779754,
        0.915437587155765040643953616155,
        0.925078932907075652364132996223,
        0.934068436157725787999477771530,
        0.942411565191083059812560025759,
        0.950115297521294876557842262038,
        0.957188216109860962736208621751,
        0.963640621569812132520974048832,
        0.969484659502459231770908123207,
        0.974734459752402667760726712998,
        0.979406281670862683806133521364,
        0.983518657578632728761664630771,
        0.987092527954034067189898792469,
        0.990151370400770159180535140748,
        0.992721344282788615328202203758,
        0.994831502800621000519130529785,
        0.996514145914890273848684083613,
        0.997805354495957274561833338686,
        0.998745614468095114703528542398,
        0.999380338025023581928079338774,
        0.999760490924432047330447933438,
        0.999943996207054375763853646470,
        0.999997596379748464620231592559,
    ],
];

pub(super) static HALF_WEIGHTS: [&[f64]; 8] = [
    // level 1: weights for nodes 0 <= x, ascending
    &[
        2.00000000000000000000000000000,
    ],
    // level 2: weights for nodes 0 <= x, ascending
    &[
        0.888888888888888888888888888889,
        0.555555555555555555555555555556,
    ],
    // level 3: weights for nodes 0 <= x, ascending
    &[
        0.450916538658474142345110087046,
        0.401397414775962222905051818618,
        0.268488089868333440728569280667,
        0.104656226026467265193823857192,
    ],
    // level 4: weights for nodes 0 <= x, ascending
    &[
        0.225510499798206687386422549156,
        0.219156858401587496403693161644,
        0.200628529376989021033931873331,
        0.171511909136391380787353165020,
        0.134415255243784220359968764802,
        0.0929271953151245376858942226542,
        0.0516032829970797396969201205679,
        0.0170017196299402603390274174027,
    ],
    // level 5: weights for nodes 0 <= x, ascending
    &[
        0.112755256720768691607149869984,
        0.111956873020953456880143562321,
        0.109578421055924638236688360573,
        0.105669893580234809743815890442,
        0.100314278611795578771293642695,
        0.0936271099812644736166587803393,
        0.0857559200499903511541865204368,
        0.0768796204990035310427051900809,
        0.0672077542959907035404010635813,
        0.0569795094941233574121973665457,
        0.0464628932617579865414046429639,
        0.0359571033071293220967778262210,
        0.0258075980961766535646461187652,
        0.0164460498543878109337883880690,
        0.00843456573932110624631492964416,
        0.00254478079156187441540278232983,
    ],
    // level 6: weights for nodes 0 <= x, ascending
    &[
        0.0563776283603847173876625571652,
        0.0562776998312543012725953494255,
        0.0559784365104763194075533785872,
        0.0554814043565593639878384079955,
        0.0547892105279628650322175309942,
        0.0539054993352660639268769548864,
        0.0528349467901165198620766563965,
        0.0515832539520484587768091008575,
        0.0501571393058995374136795474240,
        0.0485643304066731987159471181668,
        0.0468135549906280124026480823343,
        0.0449145316536321974142542482618,
        0.0428779600250077344929123037820,
        0.0407155101169443189338940956005,
        0.0384398102494555320386403467779,
        0.0360644327807825726401071605896,
        0.0336038771482077305417339884732,
        0.0310735511116879648798843878245,
        0.0284897547458335486125060947724,
        0.0258696793272147469107582662448,
        0.0232314466399102694432564889366,
        0.0205942339159127111491885619503,
        0.0179785515681282703328960466709,
        0.0154067504665594978021308263315,
        0.0129038001003512656259766532186,
        0.0104982469096213218982728445836,
        0.00822300795723592966925778441547,
        0.00611550682211724633967828383326,
        0.00421763044155885483908422682357,
        0.00257904979468568827242779555856,
        0.00126515655623006801137260909998,
        0.000363221481845530659693580600241,
    ],
    // level 7: weights for nodes 0 <= x, ascending
    &[
        0.0281888141801923586938312785882,
        0.0281763190330166021306535805326,
        0.0281388499156271506362976747069,
        0.0280764557938172466068478485337,
        0.0279892182552381597037766893004,
        0.0278772514766137016085237966903,
        0.0277407021782796819939192039891,
        0.0275797495664818730348687126189,
        0.0273946052639814325161087655094,
        0.0271855132296247918192086027320,
        0.0269527496676330319634384774241,
        0.0266966229274503599061546992882,
        0.0264174733950582599310383282312,
        0.0261156733767060976804988093771,
        0.0257916269760242293884045503660,
        0.0254457699654647658125743963446,
        0.0250785696529497687068397738443,
        0.0246905247444876769090608353528,
        0.0242821652033365993579735587740,
        0.0238540521060385400804460326687,
        0.0234067774953140062013240419700,
        0.0229409642293877487608005319196,
        0.0224572658268160987071271218144,
        0.0219563663053178249392605004208,
        0.0214389800125038672464561593341,
        0.0209058514458120238522218505879,
        0.0203577550584721594669470211178,
        0.0197954950480974994880277229389,
        0.0192199051247277660193202803314,
        0.0186318482561387901863140395333,
        0.0180322163903912863200530999857,
        0.0174219301594641737471522631397,
        0.0168019385741038652708694177373,
        0.0161732187295777199419479627980,
        0.0155367755558439824399284170163,
        0.0148936416648151820348103959268,
        0.0142448773729167743063415662436,
        0.0135915710097655467895729161815,
        0.0129348396636073734547339558742,
        0.0122758305600827700869663307414,
        0.0116157233199551347269849538868,
        0.0109557333878379016480327257363,
        0.0102971169579563555236864641070,
        0.00964117772970253669529830300285,
        0.00898927578406413572328060374119,
        0.00834283875396815770558412424168,
        0.00770337523327974184816597819689,
        0.00707248999543355546804631626841,
        0.00645190005017573692280509776824,
        0.00584344987583563950755951196451,
        0.00524912345480885912513384612635,
        0.00467105037211432174740543340827,
        0.00411150397865469304717026799389,
        0.00357289278351729964938448769865,
        0.00305775341017553113613138395354,
        0.00256876494379402037312771598564,
        0.00210881524572663287933255325908,
        0.00168114286542146990631373023491,
        0.00128952408261041739209850869779,
        0.000938369848542381500794044394682,
        0.000632607319362633544219014096676,
        0.000377746646326984660274364525158,
        0.000180739564445388357820333919515,
        0.0000505360952078625176246656006337,
    ],
    // level 8: weights for nodes 0 <= x, ascending
    &[
        0.0140944070900961793469156392941,
        0.0140928450691604083549592735387,
        0.0140881595165083010653267902663,
        0.0140803519625536613248458411105,
        0.0140694249578135753181488373534,
        0.0140553820726499642771679253311,
        0.0140382278969086233034239242668,
        0.0140179680394566088098722249688,
        0.0139946091276190798518883446502,
        0.0139681588065169385157277797674,
        0.0139386257383068508042618983451,
        0.0139060196013254612635312215254,
        0.0138703510891398409969596019945,
        0.0138316319095064286764959688535,
        0.0137898747832409365174343563095,
        0.0137450934430018966322520540026,
        0.0136973026319907162580543827547,
        0.0136465181025712914283998912159,
        0.0135927566148123959096043013660,
        0.0135360359349562136136653091891,
        0.0134763748338165159817192387120,
        0.0134137930851100985129663776086,
        0.0133483114637251799530773496441,
        0.0132799517439305306503775089710,
        0.0132087366975291299655191641156,
        0.0131346900919601528363813260382,
        0.0130578366883530488402494046886,
        0.0129782022395373992858421803348,
        0.0128958134880121146942022751830,
        0.0128106981638773619668417039218,
        0.0127228849827323829062871981723,
        0.0126324036435420787645405441085,
        0.0125392848264748843534198869221,
        0.0124435601907140352631495031087,
        0.0123452623722438384545304176764,
        0.0122444249816119858986292063325,
        0.0121410826016682996789867793870,
        0.0120352707852795626304498694306,
        0.0119270260530192700402230163344,
        0.0118163858908302357632247900085,
        0.0117033887476570031006620209850,
        0.0115880740330439525684239776012,
        0.0114704821146938743804002659598,
        0.0113506543159805966017344840805,
        0.0112286329134080493535635609072,
        0.0111044611340069265369994188455,
        0.0109781831526589124696302502104,
        0.0108498440893373140990245263318,
        0.0107194900062519336232280796670,
        0.0105871679048851979309428189932,
        0.0104529257229060119261109252939,
        0.0103168123309476216819207000244,
        0.0101788775292360797334735105589,
        0.0100391720440568407981810290438,
        0.00989774752404874974401386146946,
        0.00975465653631741146108293452735,
        0.00960995256236388300966014016571,
        0.00946368999383006529427243113943,
        0.00931592412806939509315701976664,
        0.00916671116356078840670519648473,
        0.00901610819519564316002654999286,
        0.00886417320948249426411429453092,
        0.00871096507973208687357613156986,
        0.00855654356130768961917293275005,
        0.00840096928705193263543470886867,
        0.00824430376303286803055059706535,
        0.00808660936478885997097398139902,
        0.00792794933429484911025254235116,
        0.00776838777792199121996420850815,
        0.00760798966571905658321739694223,
        0.00744682083240759101740519796338,
        0.00728494798055380706387981147535,
        0.00712243868645838715317078312182,
        0.00695936140939042293944507544479,
        0.00679578550488277339478645809075,
        0.00663178124290188789412200734180,
        0.00646741983180368672736697793712,
        0.00630277344908575871716398763419,
        0.00613791528004138504348316537068,
        0.00597291956550816580494729856936,
        0.00580786165997756736349247694340,
        0.00564281810138444415845460587312,
        0.00547786669391895082401636286815,
        0.00531308660518705656628804340373,
        0.00514855847897817776184323205351,
        0.00498436456476553860120001022162,
        0.00482058886485126834764915150142,
        0.00465731729975685477727794484850,
        0.00449463789203206786164030187059,
        0.00433264096809298285453769983325,
        0.00417141937698407885279206212084,
        0.00401106872407502339888993614904,
        0.00385168761663987092408298909846,
        0.00369337791702565081825729998764,
        0.00353624499771677773402315813405,
        0.00338039799108692038234993039039,
        0.00322595002508786846140254888665,
        0.00307301843470257832340783765227,
        0.00292172493791781975377975593712,
        0.00277219576459345099399521424961,
        0.00262456172740442956256692394304,
        0.00247895822665756793067821535745,
        0.00233552518605716087370269795035,
        0.00219440692536383883880291840869,
        0.00205575198932734652358557179892,
        0.00191971297101387241252271734467,
        0.00178644639175864982468103287043,
        0.00165611272815445260521682786451,
        0.00152887670508776556838105789798,
        0.00140490799565514464271521123297,
        0.00128438247189701017680511226369,
        0.00116748411742995940769333157873,
        0.00105440762286331677224956681257,
        0.000945361516858525382463015198607,
        0.000840571432710722463646844648205,
        0.000740282804244503330463160177700,
        0.000644762041305724779327197260133,
        0.000554295314930374714917732120267,
        0.000469184924247850409754566477203,
        0.000389745284473282293215563879846,
        0.000316303660822264476886001542320,
        0.000249212400482997294024537662868,
        0.000188873264506504913660930569063,
        0.000135754910949228719729842895656,
        0.0000903727346587511492612048292799,
        0.0000532752936697806131253524393896,
        0.0000251578703842806614886029901874,
        0.00000693793643241082671695382297170,
    ],
];
